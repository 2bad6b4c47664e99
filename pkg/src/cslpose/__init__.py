"""Symmetry-aware object pose toolkit.

Core layers:

- :mod:`cslpose.geom` -- coordinate conversions, rotations, angle arithmetic.
- :mod:`cslpose.symmetry` -- symmetry specs, point maps, star/dash transforms.
- :mod:`cslpose.render` -- ray-cast renderer producing ground-truth point maps.
- :mod:`cslpose.losses` -- representation losses with hand-derived gradients.
- :mod:`cslpose.reverse` -- equivalence classes and consistent disambiguation.
- :mod:`cslpose.pnp` -- pose recovery from 2D-3D correspondences.
- :mod:`cslpose.toylab` -- the 1-DOF disc study with a from-scratch network.
- :mod:`cslpose.service` / :mod:`cslpose.cli` -- HTTP service and thin client.
"""

__version__ = "0.1.0"

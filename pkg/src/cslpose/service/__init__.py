"""HTTP service exposing the pose toolkit: recovery, round trips, loss checks
and the representation study, with pydantic request/response models."""

from .app import create_app

__all__ = ["create_app"]

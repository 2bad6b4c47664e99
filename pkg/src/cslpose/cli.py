"""Command line client for the pose toolkit.

The CLI builds the same request models the HTTP service consumes and either
calls the service handlers in-process (default) or POSTs them to a running
server (--server URL).  Exit codes: 0 success, 1 violated invariant in
`losscheck`, 2 invalid configuration, 3 degenerate scene.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import httpx

from . import __version__
from .manifest import write_manifest
from .pipeline import DegenerateSceneError
from .pnp import PnPConvergenceError, PnPDegenerateError
from .render import RenderError
from .service import handlers
from .service.schemas import (LossCheckRequest, LossCheckResponse, ObjectModel,
                              PoseModel, RoundtripRequest, RoundtripResponse,
                              SymmetrySpecModel, ToyConfigModel, ToyRunRequest,
                              ToyRunResponse)
from .toylab.study import ExperimentConfig

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class ServiceClient:
    """Thin client: in-process handler calls, or HTTP when a server is given."""

    def __init__(self, server: str | None = None):
        self.server = server

    def _post(self, path: str, request, response_cls, local_handler):
        if self.server is None:
            try:
                return local_handler(request)
            except (DegenerateSceneError, RenderError, PnPDegenerateError,
                    PnPConvergenceError) as exc:
                raise CliError(EXIT_DEGENERATE, str(exc)) from exc
            except (ValueError, NotImplementedError) as exc:
                raise CliError(EXIT_CONFIG, str(exc)) from exc
        with httpx.Client(base_url=self.server, timeout=None) as client:
            resp = client.post(path, json=request.model_dump(mode="json"))
        if resp.status_code != 200:
            detail = {}
            try:
                detail = resp.json().get("detail", {})
            except Exception:
                pass
            kind = detail.get("kind", "invalid_config") if isinstance(detail, dict) else "invalid_config"
            code = EXIT_DEGENERATE if kind == "degenerate_scene" else EXIT_CONFIG
            message = detail.get("message", resp.text) if isinstance(detail, dict) else resp.text
            raise CliError(code, message)
        return response_cls.model_validate(resp.json())

    def toy(self, request: ToyRunRequest) -> ToyRunResponse:
        return self._post("/api/toy", request, ToyRunResponse, handlers.handle_toy)

    def roundtrip(self, request: RoundtripRequest) -> RoundtripResponse:
        return self._post("/api/roundtrip", request, RoundtripResponse,
                          handlers.handle_roundtrip)

    def losscheck(self, request: LossCheckRequest) -> LossCheckResponse:
        return self._post("/api/losscheck", request, LossCheckResponse,
                          handlers.handle_losscheck)


_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_CONFIG_HELP = ", ".join(f"{f.name} (default {f.default})"
                         for f in _CONFIG_FIELDS.values())


def parse_toy_config(path: str | None, overrides: dict) -> ToyConfigModel:
    """Flat `key = value` config file; CLI flags override file entries."""
    values: dict = {}
    if path is not None:
        if not os.path.exists(path):
            raise CliError(EXIT_CONFIG, f"config file not found: {path}")
        with open(path) as f:
            for lineno, raw in enumerate(f, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise CliError(EXIT_CONFIG, f"{path}:{lineno}: expected 'key = value'")
                key, value = (part.strip() for part in line.split("=", 1))
                if key not in _CONFIG_FIELDS:
                    raise CliError(EXIT_CONFIG, f"{path}:{lineno}: unknown config key {key!r}")
                values[key] = _coerce(key, value)
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        model = ToyConfigModel(**values)
        model.to_config()  # run the dataclass validation too
    except Exception as exc:
        raise CliError(EXIT_CONFIG, f"invalid config: {exc}") from exc
    return model


def _coerce(key: str, value: str):
    if value.lower() in ("none", ""):
        return None
    if key == "representation":
        return value
    if key in ("learning_rate", "transition_threshold"):
        return float(value)
    return int(value)


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip() != ""]


def cmd_toy(args) -> int:
    overrides = {"representation": args.representation}
    config = parse_toy_config(args.config, overrides)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    results_path = os.path.join(out_dir, "results.csv")
    sweeps_path = os.path.join(out_dir, "sweeps.csv")
    manifest_path = os.path.join(out_dir, "manifest.txt")

    cfg = config.to_config()
    seeds = [cfg.seed_for(rep, r) for rep in cfg.selected() for r in range(cfg.num_restarts)]
    entries = dict(config.model_dump())
    entries["seeds"] = " ".join(str(s) for s in seeds)
    write_manifest(manifest_path, "toy", entries,
                   {"results": results_path, "sweeps": sweeps_path})

    client = ServiceClient(args.server)
    response = client.toy(ToyRunRequest(config=config))
    with open(results_path, "w") as f:
        f.write(response.table_csv)
    with open(sweeps_path, "w") as f:
        f.write(response.sweeps_csv)
    print(response.table_csv, end="")
    print(f"results: {results_path}\nsweeps: {sweeps_path}\nmanifest: {manifest_path}")
    return EXIT_OK


def cmd_roundtrip(args) -> int:
    size = _float_list(args.size) if args.size else None
    if size is None:
        size = [0.25, 0.25, 0.4] if args.object == "box" else [0.25, 0.6]
    pose = None
    if args.pose:
        vals = _float_list(args.pose)
        if len(vals) != 12:
            raise CliError(EXIT_CONFIG, "--pose needs 12 values: 9 rotation entries "
                                        "(row-major) then 3 translation entries")
        pose = PoseModel(rotation=[vals[0:3], vals[3:6], vals[6:9]],
                         translation=tuple(vals[9:12]))
    fold = "inf" if args.fold == "inf" else int(args.fold)
    request = RoundtripRequest(
        object=ObjectModel(kind=args.object, size=size),
        symmetry=SymmetrySpecModel(axis=tuple(_float_list(args.axis)), fold=fold),
        pose=pose, noise_sigma=args.noise, seed=args.seed)
    client = ServiceClient(args.server)
    report = client.roundtrip(request)
    for key, value in report.model_dump().items():
        print(f"{key}: {value}")
    return EXIT_OK


def cmd_losscheck(args) -> int:
    client = ServiceClient(args.server)
    response = client.losscheck(LossCheckRequest(trials=args.trials, seed=args.seed))
    for check in response.checks:
        status = "PASS" if check.passed else "FAIL"
        suffix = f"  ({check.detail})" if check.detail else ""
        print(f"{status} {check.name}{suffix}")
    return EXIT_OK if response.all_passed else EXIT_INVARIANT


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("cslpose.service.app:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cslpose",
        description="Symmetry-aware pose representation toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    toy = sub.add_parser("toy", help="run the representation comparison study")
    toy.add_argument("--config", default=None,
                     help="flat key = value file; keys: " + _CONFIG_HELP)
    toy.add_argument("--representation", default=None,
                     help="run a single representation row (e.g. csl-vector/ae)")
    toy.add_argument("--out", default="toy-results", help="output directory")
    toy.add_argument("--server", default=None, help="POST to a running service instead")
    toy.set_defaults(fn=cmd_toy)

    rt = sub.add_parser("roundtrip", help="render, star/dash, reverse, PnP, report errors")
    rt.add_argument("--object", choices=["box", "cylinder"], default="box")
    rt.add_argument("--size", default=None,
                    help="box: hx,hy,hz half extents; cylinder: radius,height")
    rt.add_argument("--axis", default="0,0,1", help="symmetry axis")
    rt.add_argument("--fold", default="4", help="fold count or 'inf'")
    rt.add_argument("--pose", default=None, help="12 values: rotation row-major + translation")
    rt.add_argument("--noise", type=float, default=0.0, help="map noise sigma (meters)")
    rt.add_argument("--seed", type=int, default=0)
    rt.add_argument("--server", default=None)
    rt.set_defaults(fn=cmd_roundtrip)

    lc = sub.add_parser("losscheck", help="property battery over the losses")
    lc.add_argument("--trials", type=int, default=1000)
    lc.add_argument("--seed", type=int, default=0)
    lc.add_argument("--server", default=None)
    lc.set_defaults(fn=cmd_losscheck)

    srv = sub.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())

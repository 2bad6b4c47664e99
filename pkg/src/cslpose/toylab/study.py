"""Training loop and the representation comparison harness.

Every (representation, restart) run is fully determined by its seed: network
initialization, batch shuffling and the texture all derive from it, so runs
can be distributed over worker processes and reproduced bit-exactly.  For each
representation the restart with the median test loss is retrained and its
angle error, pixel error and transition count on the test sweep are reported.
"""

from __future__ import annotations

import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .decode import angle_errors, count_transitions
from .disc import DiscTexture, ToyDataset, make_datasets
from .nn import Adam, EncoderDecoderNet, EncoderHeadNet, TrainingDivergedError
from .representations import REPRESENTATIONS, REPRESENTATION_KEYS, Representation


@dataclass
class ExperimentConfig:
    representation: str = "all"          # one key or "all"
    epochs: int = 500
    batch_size: int = 10
    learning_rate: float = 1e-3
    num_restarts: int = 11
    base_seed: int = 0
    image_width: int = 64
    texture_folds: int = 6
    texture_samples: int = 64
    texture_seed: int = 0
    texture_smoothness: int = 12
    transition_threshold: Optional[float] = None  # default theta/16
    workers: Optional[int] = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.num_restarts < 1 or self.num_restarts % 2 == 0:
            raise ValueError("num_restarts must be odd so the median is well-defined")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.representation != "all" and self.representation not in REPRESENTATIONS:
            raise ValueError(f"unknown representation {self.representation!r}; "
                             f"choose from {REPRESENTATION_KEYS} or 'all'")

    def selected(self) -> list[str]:
        return REPRESENTATION_KEYS if self.representation == "all" else [self.representation]

    def seed_for(self, rep_key: str, restart: int) -> int:
        return self.base_seed + 1000 * REPRESENTATION_KEYS.index(rep_key) + restart


def build_net(rep: Representation, width: int, rng: np.random.Generator):
    if rep.kind == "image":
        return EncoderDecoderNet(rep.out_dim, width, rng)
    return EncoderHeadNet(rep.out_dim, width, rng)


def train(net, dataset: ToyDataset, rep_key: str, cfg: ExperimentConfig, seed: int):
    """Train a net on a dataset; returns the per-epoch mean loss curve.

    Deterministic for a given seed (shuffling and nothing else draws from the
    RNG).  Raises TrainingDivergedError when the loss becomes non-finite.
    """
    rep = REPRESENTATIONS[rep_key]
    theta = dataset.texture.theta
    X = dataset.images[..., None]
    Y = rep.targets(dataset.alphas, dataset.texture, dataset.width)
    pre_full = rep.precompute(theta, Y) if rep.precompute else None
    rng = np.random.default_rng(seed)
    opt = Adam(net.params(), lr=cfg.learning_rate)
    n = len(dataset)
    curve = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            out = net.forward(X[idx], train=True)
            pre = pre_full[:, idx] if pre_full is not None else None
            value, grad = rep.loss(theta, Y[idx], out, pre)
            net.backward(grad)
            opt.step()
            total += value * len(idx)
        mean_loss = total / n
        if not np.isfinite(mean_loss):
            raise TrainingDivergedError(epoch)
        curve.append(mean_loss)
    return curve


def _eval_outputs(net, dataset: ToyDataset, chunk: int = 256) -> np.ndarray:
    X = dataset.images[..., None]
    outs = [net.forward(X[lo:lo + chunk], train=False) for lo in range(0, len(dataset), chunk)]
    return np.concatenate(outs, axis=0)


def _run_once(cfg: ExperimentConfig, rep_key: str, seed: int):
    """Train one restart; returns (test loss, net, train set, test set, outputs)."""
    tex = DiscTexture.random(cfg.texture_samples, cfg.texture_folds, cfg.texture_seed,
                             smoothness=cfg.texture_smoothness)
    train_ds, test_ds = make_datasets(tex, cfg.image_width)
    rep = REPRESENTATIONS[rep_key]
    net = build_net(rep, cfg.image_width, np.random.default_rng(seed))
    train(net, train_ds, rep_key, cfg, seed)
    out = _eval_outputs(net, test_ds)
    Y = rep.targets(test_ds.alphas, tex, cfg.image_width)
    test_loss, _ = rep.loss(tex.theta, Y, out)
    return test_loss, net, train_ds, test_ds, out


def _worker_loss(cfg_dict: dict, rep_key: str, seed: int) -> float:
    cfg = ExperimentConfig(**cfg_dict)
    return _run_once(cfg, rep_key, seed)[0]


def _metrics_for_run(cfg: ExperimentConfig, rep_key: str, seed: int) -> dict:
    test_loss, net, train_ds, test_ds, out = _run_once(cfg, rep_key, seed)
    rep = REPRESENTATIONS[rep_key]
    tex = test_ds.texture
    preds = np.asarray(rep.decode(tex.theta, out, tex, cfg.image_width), dtype=float)
    errs = angle_errors(preds, test_ds.alphas, tex.theta)
    return {
        "test_loss": test_loss,
        "pixel_error": test_loss if rep.kind == "image" else None,
        "angle_error": float(np.mean(errs)),
        "transitions": count_transitions(preds, tex.theta, cfg.transition_threshold),
        "alphas": test_ds.alphas.copy(),
        "preds": preds,
    }


def _worker_metrics(cfg_dict: dict, rep_key: str, seed: int) -> dict:
    cfg = ExperimentConfig(**cfg_dict)
    return _metrics_for_run(cfg, rep_key, seed)


@dataclass
class RowResult:
    representation: str
    loss: str
    pixel_error: Optional[float]
    angle_error: float
    transitions: int
    seed_of_median: int
    median_test_loss: float

    @property
    def key(self) -> str:
        return f"{self.representation}/{self.loss}"


@dataclass
class StudyResult:
    rows: list[RowResult]
    sweeps: dict = field(default_factory=dict)  # key -> (alphas, predicted angles)

    def row(self, key: str) -> RowResult:
        for r in self.rows:
            if r.key == key:
                return r
        raise KeyError(key)

    def table_csv(self) -> str:
        buf = io.StringIO()
        buf.write("representation,loss,pixel_error,angle_error,transitions,seed_of_median\n")
        for r in self.rows:
            px = "" if r.pixel_error is None else f"{r.pixel_error:.8g}"
            buf.write(f"{r.representation},{r.loss},{px},{r.angle_error:.8g},"
                      f"{r.transitions},{r.seed_of_median}\n")
        return buf.getvalue()

    def sweeps_csv(self) -> str:
        buf = io.StringIO()
        buf.write("representation,loss,alpha,predicted_angle\n")
        for key, (alphas, preds) in self.sweeps.items():
            name, loss = key.split("/", 1)
            for a, p in zip(alphas, preds):
                buf.write(f"{name},{loss},{a:.8g},{p:.8g}\n")
        return buf.getvalue()


def run_study(cfg: ExperimentConfig) -> StudyResult:
    """Run the representation comparison; reports the median-loss restart per row."""
    jobs = [(rep_key, restart) for rep_key in cfg.selected()
            for restart in range(cfg.num_restarts)]
    workers = cfg.workers or min(os.cpu_count() or 1, len(jobs))
    losses: dict[tuple[str, int], float] = {}

    parallel = workers > 1 and len(jobs) > 1
    cfg_dict = asdict(cfg)
    if parallel:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {(rep_key, restart): pool.submit(
                _worker_loss, cfg_dict, rep_key, cfg.seed_for(rep_key, restart))
                for rep_key, restart in jobs}
            for key, fut in futures.items():
                losses[key] = fut.result()
    else:
        for rep_key, restart in jobs:
            losses[(rep_key, restart)] = _run_once(
                cfg, rep_key, cfg.seed_for(rep_key, restart))[0]

    # retrain the median restart of every row to extract its metrics
    median: dict[str, tuple[float, int]] = {}
    for rep_key in cfg.selected():
        per_restart = sorted((losses[(rep_key, r)], r) for r in range(cfg.num_restarts))
        median_loss, restart = per_restart[cfg.num_restarts // 2]
        median[rep_key] = (median_loss, cfg.seed_for(rep_key, restart))

    metrics: dict[str, dict] = {}
    if parallel and len(median) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {rep_key: pool.submit(_worker_metrics, cfg_dict, rep_key, seed)
                       for rep_key, (_, seed) in median.items()}
            for rep_key, fut in futures.items():
                metrics[rep_key] = fut.result()
    else:
        for rep_key, (_, seed) in median.items():
            metrics[rep_key] = _metrics_for_run(cfg, rep_key, seed)

    rows = []
    sweeps = {}
    for rep_key in cfg.selected():
        rep = REPRESENTATIONS[rep_key]
        median_loss, seed = median[rep_key]
        m = metrics[rep_key]
        rows.append(RowResult(
            representation=rep.name,
            loss=rep.loss_name,
            pixel_error=m["pixel_error"],
            angle_error=m["angle_error"],
            transitions=m["transitions"],
            seed_of_median=seed,
            median_test_loss=median_loss,
        ))
        sweeps[rep_key] = (m["alphas"], m["preds"])
    return StudyResult(rows=rows, sweeps=sweeps)

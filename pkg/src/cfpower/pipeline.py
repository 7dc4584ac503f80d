"""Datasets of network realizations, the training loop and inference."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .metrics import SinrCoefficients, aggregate_lsf, coefficients_from_beta
from .neural import LossSpec, MlpModel, batch_loss_and_grads, forward, init_mlp, sgd_step
from .params import SystemParams
from .scenario import generate_scenario, xcorr_from_indices

log = logging.getLogger(__name__)

DATASET_FORMAT_VERSION = 1
DEFAULT_LR = {"maxmin": 0.3, "maxmin_prior": 0.3, "sum_rate": 1.0, "product": 0.03}


def derive_seed(seed: int, *keys: int) -> int:
    """Stable 63-bit child seed of ``seed`` for the integer path ``keys``."""
    state = np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


@dataclass
class Dataset:
    params: SystemParams
    seed: int
    sample_seeds: np.ndarray   # (N,)
    beta: np.ndarray           # (N, K, L)
    pilot_index: np.ndarray    # (N, K)
    B: np.ndarray = field(init=False)
    coeffs: SinrCoefficients = field(init=False)

    def __post_init__(self):
        self.B = aggregate_lsf(self.beta)
        self.coeffs = coefficients_from_beta(self.beta, self.xcorr, self.params)

    @property
    def xcorr(self) -> np.ndarray:
        idx = self.pilot_index
        return (idx[:, :, None] == idx[:, None, :]).astype(float)

    def __len__(self) -> int:
        return self.beta.shape[0]

    @property
    def K(self) -> int:
        return self.beta.shape[1]

    @property
    def L(self) -> int:
        return self.beta.shape[2]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.params, self.seed, self.sample_seeds[idx], self.beta[idx], self.pilot_index[idx])

    def scenario(self, i: int):
        """Regenerate the realization behind sample ``i``."""
        return generate_scenario(self.params, int(self.sample_seeds[i]))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self.params.to_dict(), sort_keys=True).encode())
        h.update(np.int64(self.seed).tobytes())
        h.update(np.ascontiguousarray(self.beta).tobytes())
        h.update(np.ascontiguousarray(self.pilot_index, dtype=np.int64).tobytes())
        return h.hexdigest()

    def save(self, path) -> None:
        meta = {
            "format": "cfpower.dataset",
            "version": DATASET_FORMAT_VERSION,
            "params": self.params.to_dict(),
            "seed": int(self.seed),
            "digest": self.digest(),
        }
        with open(path, "wb") as fh:
            np.savez_compressed(
                fh, meta=np.array(json.dumps(meta)), sample_seeds=self.sample_seeds,
                beta_db=10 * np.log10(self.beta), pilot_index=self.pilot_index,
            )

    @classmethod
    def load(cls, path) -> "Dataset":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("format") != "cfpower.dataset" or meta.get("version") != DATASET_FORMAT_VERSION:
                raise ValueError(f"{path}: not a version-1 cfpower dataset")
            params = SystemParams.from_dict(meta["params"])
            return cls(params, meta["seed"], z["sample_seeds"], 10 ** (z["beta_db"] / 10), z["pilot_index"])


def build_dataset(params: SystemParams, n: int, seed: int) -> Dataset:
    """``n`` independent realizations; sample ``i`` uses ``derive_seed(seed, i)``."""
    if n < 1:
        raise ValueError("dataset needs at least one sample")
    seeds = np.array([derive_seed(seed, i) for i in range(n)], dtype=np.int64)
    scenarios = [generate_scenario(params, int(s)) for s in seeds]
    beta = np.stack([s.beta for s in scenarios])
    pilots = np.stack([s.pilot_index for s in scenarios])
    return Dataset(params, int(seed), seeds, beta, pilots)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 256
    lr0: float = 0.3
    lr_drop_epoch: int = 150
    lr_drop_factor: float = 0.1
    loss: LossSpec = field(default_factory=LossSpec)
    seed: int = 0
    hidden: tuple = (128, 64)
    momentum: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr0 < 0:
            raise ValueError("lr0 must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")

    def lr_at(self, epoch: int) -> float:
        """Learning rate for zero-based ``epoch``."""
        return self.lr0 if epoch < self.lr_drop_epoch else self.lr0 * self.lr_drop_factor

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs, "batch_size": self.batch_size, "lr0": self.lr0,
            "lr_drop_epoch": self.lr_drop_epoch, "lr_drop_factor": self.lr_drop_factor,
            "loss": self.loss.to_dict(), "seed": self.seed, "hidden": list(self.hidden),
            "momentum": self.momentum,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        doc = dict(doc)
        if "loss" in doc:
            doc["loss"] = LossSpec.from_dict(doc["loss"])
        if "hidden" in doc:
            doc["hidden"] = tuple(doc["hidden"])
        return cls(**doc)


@dataclass
class LearningCurve:
    loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.loss)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "mean_loss", "lr"])
        for e, (v, lr) in enumerate(zip(self.loss, self.lr), start=1):
            w.writerow([e, repr(float(v)), repr(float(lr))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "LearningCurve":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls([float(r["mean_loss"]) for r in rows], [float(r["lr"]) for r in rows])

    def plateau_epoch(self, window: int = 20, rtol: float = 0.01) -> int | None:
        """First 1-based epoch ``e`` whose loss is within ``rtol`` of epoch ``e - window``.

        The change is relative to the earlier value. Returns None if no such
        epoch exists.
        """
        y = np.asarray(self.loss, dtype=float)
        if len(y) <= window:
            return None
        prev, cur = y[:-window], y[window:]
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.abs(cur - prev) / np.abs(prev)
        rel = np.where(cur == prev, 0.0, rel)
        hits = np.nonzero(rel < rtol)[0]
        return int(hits[0] + window + 1) if hits.size else None


class TrainingDiverged(FloatingPointError):
    def __init__(self, message: str, curve: LearningCurve):
        super().__init__(message)
        self.curve = curve


def train(ds: Dataset, cfg: TrainConfig, progress=None):
    """Minibatch SGD on the unsupervised loss; returns (model, learning curve).

    ``progress`` is an optional callable receiving (epoch, mean_loss).
    """
    if cfg.batch_size > len(ds):
        raise ValueError(f"batch_size {cfg.batch_size} exceeds dataset size {len(ds)}")
    K = ds.K
    model = init_mlp((K, *cfg.hidden, K), seed=derive_seed(cfg.seed, 0))
    logB = np.log10(ds.B)
    model = model.with_norm_stats(logB.mean(axis=0), np.maximum(logB.std(axis=0), 1e-12))
    rng = np.random.default_rng(derive_seed(cfg.seed, 1))

    curve = LearningCurve()
    velocity = None
    n = len(ds)
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        order = rng.permutation(n)
        sample_loss = np.empty(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            where = f"epoch {epoch + 1}, batch {start // cfg.batch_size}"
            try:
                losses, (dws, dbs) = batch_loss_and_grads(model, cfg.loss, ds.B[idx], ds.coeffs[idx])
            except FloatingPointError as exc:
                raise TrainingDiverged(f"{exc} at {where}", curve) from exc
            if not np.all(np.isfinite(losses)):
                raise TrainingDiverged(f"non-finite loss at {where}", curve)
            sample_loss[idx] = losses
            grads = (dws, dbs)
            if cfg.momentum > 0:
                flat = [*dws, *dbs]
                velocity = flat if velocity is None else [cfg.momentum * v + g for v, g in zip(velocity, flat)]
                grads = (velocity[:len(dws)], velocity[len(dws):])
            try:
                model = sgd_step(model, grads, lr)
            except FloatingPointError as exc:
                raise TrainingDiverged(f"{exc} at {where}", curve) from exc
        # per-sample placement makes the epoch mean independent of batch order
        epoch_loss = float(np.mean(sample_loss))
        curve.loss.append(epoch_loss)
        curve.lr.append(lr)
        if progress is not None:
            progress(epoch + 1, epoch_loss)
        log.debug("epoch %d loss %.6g lr %g", epoch + 1, epoch_loss, lr)
    return model, curve


def infer(m: MlpModel, B) -> np.ndarray:
    """Power coefficients from aggregated LSF; accepts (K,) or (N, K)."""
    B = np.asarray(B, dtype=float)
    if B.shape[-1] != m.dims[0]:
        raise ValueError(f"expected {m.dims[0]} users, got {B.shape[-1]}")
    eta, _ = forward(m, B)
    return eta

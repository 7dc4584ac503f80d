"""Optimization baselines for max-min, max-sum-rate and max-product power control.

Objective values reported by every solver are expressed on SINRs:

* ``maxmin``   -> min_k SINR_k
* ``sum_rate`` -> sum_k log2(1 + SINR_k)
* ``product``  -> sum_k ln SINR_k   (log of the product objective)
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .metrics import SinrCoefficients, sinr, sinr_vjp

PRODUCT_FLOOR = 1e-6
OBJECTIVES = ("maxmin", "sum_rate", "product")


@dataclass
class SolveReport:
    eta: np.ndarray
    objective_value: float
    iterations: int
    converged: bool
    wall_time: float
    method: str = ""
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "eta": [float(x) for x in self.eta],
            "objective_value": float(self.objective_value),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "wall_time": float(self.wall_time),
            "info": self.info,
        }


def objective(c: SinrCoefficients, eta, kind: str) -> np.ndarray:
    """Objective value of ``kind`` at ``eta`` (batched over leading axes of eta)."""
    s = sinr(c, eta)
    if kind == "maxmin":
        return s.min(axis=-1)
    if kind == "sum_rate":
        return np.log2(1.0 + s).sum(axis=-1)
    if kind == "product":
        with np.errstate(divide="ignore"):
            return np.log(s).sum(axis=-1)
    raise ValueError(f"unknown objective {kind!r}")


def _check_finite(c: SinrCoefficients) -> None:
    for name in "adun":
        if not np.all(np.isfinite(getattr(c, name))):
            raise ValueError(f"non-finite SINR coefficient {name!r}")
    if not np.isfinite(c.rho):
        raise ValueError("non-finite rho")


# --------------------------------------------------------------------------
# max-min: bisection over a common SINR target
# --------------------------------------------------------------------------

class Feasibility(NamedTuple):
    feasible: bool
    eta: np.ndarray
    iterations: int
    status: str  # "converged", "direct", "exceeds_box" or "max_iter"


def feasibility_fixed_point(c: SinrCoefficients, target: float, max_iter: int = 500,
                            rtol: float = 1e-12, box_tol: float = 1e-10,
                            trace: list | None = None) -> Feasibility:
    """Decide whether every user can reach SINR ``target`` with powers in [0, 1].

    Iterates the standard interference function
    eta_k <- target / (rho a_k) * D_k(eta) from eta = 0. The iterates increase
    monotonically to the minimal power vector meeting the target, so the first
    iterate leaving the box is already a certificate of infeasibility.
    If ``max_iter`` passes first, the affine fixed point is computed directly
    instead: a positive solution of (I - tM) eta = t b certifies that the
    spectral radius of tM is below one, so it is the limit of the iteration.
    That case carries status ``"direct"``.
    """
    if target < 0:
        raise ValueError("target must be non-negative")
    eta = np.zeros(c.K)
    if trace is not None:
        trace.append(eta.copy())
    if target == 0:
        return Feasibility(True, eta, 0, "converged")
    m = c.rho * (c.d_offdiag + c.u)
    scale = target / (c.rho * c.a)
    for it in range(1, max_iter + 1):
        new = scale * (m @ eta + c.n)
        if trace is not None:
            trace.append(new.copy())
        if np.any(new > 1.0 + box_tol):
            return Feasibility(False, new, it, "exceeds_box")
        if np.max(np.abs(new - eta)) <= rtol * np.max(new):
            return Feasibility(True, np.minimum(new, 1.0), it, "converged")
        eta = new
    try:
        fixed = np.linalg.solve(np.eye(c.K) - scale[:, None] * m, scale * c.n)
    except np.linalg.LinAlgError:
        return Feasibility(False, eta, max_iter, "max_iter")
    if np.all(fixed > 0) and np.all(fixed <= 1.0 + box_tol):
        return Feasibility(True, np.minimum(fixed, 1.0), max_iter, "direct")
    return Feasibility(False, eta, max_iter, "max_iter")


def maxmin_upper_bound(c: SinrCoefficients) -> float:
    """No user can exceed rho a_k / (rho u_kk + n_k) with eta_k <= 1."""
    diag = np.diagonal(c.u)
    return float(np.min(c.rho * c.a / (c.rho * diag + c.n)))


def solve_maxmin(c: SinrCoefficients, tol: float = 1e-4, max_iter: int = 500) -> SolveReport:
    """Max-min SINR power control by bisection on the common target.

    ``tol`` is relative on the target. The returned powers are the
    fixed-point solution at the best feasible target, rescaled so the
    largest coefficient is 1 (scaling all powers up never lowers any SINR).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_finite(c)
    t0 = time.perf_counter()
    lo, hi = 0.0, maxmin_upper_bound(c)
    best = np.ones(c.K)
    steps = 0
    direct = 0
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        res = feasibility_fixed_point(c, mid, max_iter=max_iter)
        steps += 1
        direct += res.status == "direct"
        if res.feasible:
            lo, best = mid, res.eta
        else:
            hi = mid
    if np.max(best) > 0:
        best = best / np.max(best)
    value = float(objective(c, best, "maxmin"))
    return SolveReport(
        eta=best, objective_value=value, iterations=steps, converged=True,
        wall_time=time.perf_counter() - t0, method="bisection",
        info={"t_lo": lo, "t_hi": hi, "direct_solves": int(direct)},
    )


# --------------------------------------------------------------------------
# sum-rate / product: multistart projected gradient ascent
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AscentConfig:
    multistarts: int = 8
    max_iter: int = 2000
    scale_floor: float = 1e-3
    armijo_slope: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 60
    xtol: float = 1e-10
    ftol: float = 1e-12
    floor: float = PRODUCT_FLOOR
    seed: int = 0


def _value_and_grad(c: SinrCoefficients, eta: np.ndarray, kind: str):
    s = sinr(c, eta)
    if kind == "sum_rate":
        w = 1.0 / ((1.0 + s) * np.log(2.0))
        return float(np.log2(1.0 + s).sum()), sinr_vjp(c, eta, w)
    w = 1.0 / s
    return float(np.log(s).sum()), sinr_vjp(c, eta, w)


def _ascend(c, eta, kind, lo, cfg: AscentConfig):
    """Scaled projected gradient ascent with Armijo backtracking.

    The ascent direction is diag(eta) @ grad (a gradient step in log-power
    coordinates) followed by projection onto the box; trial step lengths come
    from the Barzilai-Borwein rule in the same metric.
    """
    eta = np.clip(eta, lo, 1.0)
    f, g = _value_and_grad(c, eta, kind)
    scale = np.maximum(eta, cfg.scale_floor)
    step = 1.0 / max(np.max(np.abs(scale * g)), 1e-300)
    history = [f]
    for it in range(1, cfg.max_iter + 1):
        for _ in range(cfg.max_backtracks):
            cand = np.clip(eta + step * scale * g, lo, 1.0)
            f_new, g_new = _value_and_grad(c, cand, kind)
            if f_new >= f + cfg.armijo_slope * g @ (cand - eta):
                break
            step *= cfg.shrink
        else:
            return eta, f, it, True, history  # no ascent left at machine precision
        dx, dg = cand - eta, g_new - g
        gain = f_new - f
        eta, f, g = cand, f_new, g_new
        history.append(f)
        if np.max(np.abs(dx)) <= cfg.xtol or gain <= cfg.ftol * max(abs(f), 1.0):
            return eta, f, it, True, history
        scale = np.maximum(eta, cfg.scale_floor)
        curv = -(dx @ dg)
        step = (dx @ (dx / scale)) / curv if curv > 0 else 2.0 * step
    return eta, f, cfg.max_iter, False, history


def kkt_residual(c: SinrCoefficients, eta, kind: str, lo: float) -> float:
    _, g = _value_and_grad(c, eta, kind)
    return float(np.max(np.abs(np.clip(eta + g, lo, 1.0) - eta)))


def solve_weighted(c: SinrCoefficients, objective_kind: str, cfg: AscentConfig | None = None) -> SolveReport:
    """Max-sum-rate (``"sum_rate"``) or max-product (``"product"``) power control.

    Both problems are non-convex; the best of ``cfg.multistarts`` projected
    gradient ascents is returned. Starts are the all-ones corner, the box
    center, the lower corner, then seeded uniform draws.
    """
    if objective_kind not in ("sum_rate", "product"):
        raise ValueError(f"unknown objective {objective_kind!r}")
    cfg = cfg or AscentConfig()
    _check_finite(c)
    t0 = time.perf_counter()
    K = c.K
    lo = cfg.floor if objective_kind == "product" else 0.0
    rng = np.random.default_rng(cfg.seed)
    starts = [np.ones(K), np.full(K, 0.5), np.full(K, max(lo, 0.01))]
    starts += [rng.uniform(lo, 1.0, size=K) for _ in range(max(cfg.multistarts - len(starts), 0))]
    starts = starts[: cfg.multistarts]

    best = None
    total_iter = 0
    for start in starts:
        eta, f, it, ok, _ = _ascend(c, start, objective_kind, lo, cfg)
        total_iter += it
        if best is None or f > best[1]:
            best = (eta, f, ok)
    eta, f, ok = best
    return SolveReport(
        eta=eta, objective_value=float(objective(c, eta, objective_kind)), iterations=total_iter,
        converged=bool(ok), wall_time=time.perf_counter() - t0, method=f"pga-{objective_kind}",
        info={"kkt_residual": kkt_residual(c, eta, objective_kind, lo), "starts": len(starts)},
    )


# --------------------------------------------------------------------------
# exhaustive grid oracle
# --------------------------------------------------------------------------

MAX_BRUTE_FORCE_K = 4
MAX_BRUTE_FORCE_POINTS = 120_000_000


def brute_force(c: SinrCoefficients, objective_kind: str, grid_step: float = 0.01,
                floor: float = PRODUCT_FLOOR, chunk: int = 200_000) -> SolveReport:
    """Exact argmax of the objective over a uniform grid on [0, 1]^K.

    For ``product`` the zero level is replaced by ``floor``. Ties go to the
    lexicographically smallest power vector.
    """
    if objective_kind not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective_kind!r}")
    K = c.K
    levels = np.round(np.arange(0.0, 1.0 + grid_step / 2, grid_step), 12)
    levels[-1] = 1.0
    if objective_kind == "product":
        levels[0] = floor
    n_points = len(levels) ** K
    if K > MAX_BRUTE_FORCE_K or n_points > MAX_BRUTE_FORCE_POINTS:
        raise ValueError(f"brute force refused: K={K}, {n_points} grid points")
    t0 = time.perf_counter()
    best_val, best_eta = -np.inf, None
    combos = itertools.product(levels, repeat=K)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)))
        if block.size == 0:
            break
        vals = objective(c, block, objective_kind)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_eta = float(vals[i]), block[i].copy()
    return SolveReport(
        eta=best_eta, objective_value=best_val, iterations=n_points, converged=True,
        wall_time=time.perf_counter() - t0, method=f"grid-{objective_kind}",
        info={"grid_step": grid_step},
    )

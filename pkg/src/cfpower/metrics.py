"""Closed-form uplink SINR / SE and their derivatives in the power vector.

With the per-realization constants

    a_k   = (sum_l gamma_kl)^2
    d_kj  = (sum_l gamma_kl beta_jl / beta_kl)^2 |phi_k^H phi_j|^2
    u_kj  = sum_l gamma_kl beta_jl
    n_k   = sum_l gamma_kl

the SINR is the rational function

    SINR_k = rho eta_k a_k / (rho sum_{j!=k} eta_j d_kj + rho sum_j eta_j u_kj + n_k).

All functions accept an optional leading batch axis: coefficients shaped
(N, K), (N, K, K) and powers shaped (N, K).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import ChannelStats, Scenario, estimation_stats


@dataclass(frozen=True)
class PowerAllocation:
    eta: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        if not np.all(np.isfinite(eta)) or np.any(eta < 0) or np.any(eta > 1):
            raise ValueError("power coefficients must lie in [0, 1]")
        object.__setattr__(self, "eta", eta)


def _eta(p) -> np.ndarray:
    return p.eta if isinstance(p, PowerAllocation) else np.asarray(p, dtype=float)


@dataclass(frozen=True)
class SinrCoefficients:
    a: np.ndarray
    d: np.ndarray
    u: np.ndarray
    n: np.ndarray
    rho: float

    @property
    def K(self) -> int:
        return self.a.shape[-1]

    def __getitem__(self, idx) -> "SinrCoefficients":
        """Select samples from a batched set of coefficients."""
        return SinrCoefficients(self.a[idx], self.d[idx], self.u[idx], self.n[idx], self.rho)

    @property
    def d_offdiag(self) -> np.ndarray:
        K = self.K
        return self.d * (1.0 - np.eye(K))

    def to_dict(self) -> dict:
        return {"a": self.a.tolist(), "d": self.d.tolist(), "u": self.u.tolist(),
                "n": self.n.tolist(), "rho": self.rho}

    @classmethod
    def from_dict(cls, doc: dict) -> "SinrCoefficients":
        return cls(*(np.asarray(doc[k], dtype=float) for k in "adun"), rho=float(doc["rho"]))


def coefficients_from_arrays(beta, gamma, xcorr, rho: float) -> SinrCoefficients:
    """Coefficients from beta, gamma (..., K, L) and xcorr (..., K, K)."""
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    xcorr = np.asarray(xcorr, dtype=float)
    if beta.shape != gamma.shape or xcorr.shape[-1] != beta.shape[-2] or xcorr.shape[-2] != beta.shape[-2]:
        raise ValueError(f"shape mismatch: beta {beta.shape}, gamma {gamma.shape}, xcorr {xcorr.shape}")
    n = gamma.sum(axis=-1)
    u = np.einsum("...kl,...jl->...kj", gamma, beta)
    ratio = np.einsum("...kl,...jl->...kj", gamma / beta, beta)
    d = ratio ** 2 * xcorr
    return SinrCoefficients(a=n ** 2, d=d, u=u, n=n, rho=float(rho))


def sinr_coefficients(stats: ChannelStats, s: Scenario, rho: float) -> SinrCoefficients:
    return coefficients_from_arrays(s.beta, stats.gamma, s.pilot_xcorr, rho)


def coefficients_from_beta(beta, xcorr, params) -> SinrCoefficients:
    """Shortcut: LSF (and pilot cross-correlations) straight to coefficients."""
    _, gamma = estimation_stats(beta, xcorr, params.tau_p, params.rho_p)
    return coefficients_from_arrays(beta, gamma, xcorr, params.rho)


def _interference(c: SinrCoefficients, eta: np.ndarray) -> np.ndarray:
    """The SINR denominator D_k."""
    m = c.d_offdiag + c.u
    return c.rho * np.einsum("...kj,...j->...k", m, eta) + c.n


def sinr(c: SinrCoefficients, p) -> np.ndarray:
    eta = _eta(p)
    return c.rho * eta * c.a / _interference(c, eta)


def se(sinr_values, tau_p: float, tau_c: float) -> np.ndarray:
    """Spectral efficiency in bit/s/Hz."""
    if tau_c <= tau_p:
        raise ValueError(f"tau_c ({tau_c}) must exceed tau_p ({tau_p})")
    sinr_values = np.asarray(sinr_values, dtype=float)
    return (1.0 - tau_p / tau_c) * np.log2(1.0 + sinr_values)


def sinr_jacobian(c: SinrCoefficients, p) -> np.ndarray:
    """J[..., k, j] = dSINR_k / deta_j."""
    eta = _eta(p)
    denom = _interference(c, eta)
    s = c.rho * eta * c.a / denom
    J = -(s / denom)[..., :, None] * c.rho * (c.d_offdiag + c.u)
    idx = np.arange(c.K)
    J[..., idx, idx] += c.rho * c.a / denom
    return J


def sinr_vjp(c: SinrCoefficients, p, w) -> np.ndarray:
    """w^T J without forming J: sum_k w_k dSINR_k/deta_j."""
    eta = _eta(p)
    w = np.asarray(w, dtype=float)
    denom = _interference(c, eta)
    s = c.rho * eta * c.a / denom
    v = w * s * c.rho / denom
    return w * c.rho * c.a / denom - np.einsum("...k,...kj->...j", v, c.d_offdiag + c.u)


def aggregate_lsf(beta) -> np.ndarray:
    """B_k = sum_l beta_kl (works on batches too)."""
    return np.asarray(beta, dtype=float).sum(axis=-1)

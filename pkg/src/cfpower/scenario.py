"""Random network realizations and channel-estimation statistics.

Each scenario owns one integer seed. The seed is split into three independent
substreams (positions, shadowing, pilots) so adding draws to one stage never
shifts the others.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .params import ParamsError, SystemParams

SCENARIO_FORMAT_VERSION = 1

_STREAM_POSITIONS, _STREAM_SHADOWING, _STREAM_PILOTS = range(3)


def substream(seed, index: int) -> np.random.Generator:
    """Generator for substream ``index`` of an integer seed."""
    return np.random.default_rng(np.random.SeedSequence(seed).spawn(index + 1)[index])


def wrap_distance(p, q, side: float) -> float:
    """Euclidean distance on a square torus of side ``side``."""
    delta = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
    delta = np.minimum(delta, side - delta)
    return float(np.hypot(*delta))


def wrap_distances(ue_pos: np.ndarray, ap_pos: np.ndarray, side: float) -> np.ndarray:
    """K x L matrix of torus distances between UEs and APs."""
    delta = np.abs(ue_pos[:, None, :] - ap_pos[None, :, :])
    delta = np.minimum(delta, side - delta)
    return np.sqrt((delta ** 2).sum(axis=-1))


def path_loss_db(d, params: SystemParams):
    """Three-slope pathloss in dB (a negative number) at distance ``d`` km.

    Accepts scalars or arrays.
    """
    pl = params.pathloss
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    with np.errstate(divide="ignore"):
        mid = -pl.L_const - 15 * np.log10(pl.d1) - 20 * np.log10(np.maximum(d, pl.d0))
        far = -pl.L_const - 35 * np.log10(np.maximum(d, pl.d1))
    out = np.where(d > pl.d1, far, mid)
    return float(out) if out.ndim == 0 else out


def draw_pilot_indices(K: int, tau_p: int, mode: str, rng: np.random.Generator) -> np.ndarray:
    if mode == "orthogonal":
        if K > tau_p:
            raise ParamsError(f"orthogonal pilots need K <= tau_p (K={K}, tau_p={tau_p})")
        return np.arange(K)
    if mode == "random":
        return rng.integers(0, tau_p, size=K)
    raise ParamsError(f"unknown pilot mode {mode!r}")


def xcorr_from_indices(indices: np.ndarray) -> np.ndarray:
    indices = np.asarray(indices)
    return (indices[:, None] == indices[None, :]).astype(float)


def assign_pilots(K: int, tau_p: int, mode: str, seed) -> np.ndarray:
    """Squared pilot cross-correlations |phi_k^H phi_k'|^2 as a K x K matrix.

    Pilots are drawn from a set of ``tau_p`` orthonormal sequences, so entries
    are 1 for users sharing a pilot and 0 otherwise.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return xcorr_from_indices(draw_pilot_indices(K, tau_p, mode, rng))


@dataclass(frozen=True)
class Scenario:
    ap_positions: np.ndarray   # (L, 2) km
    ue_positions: np.ndarray   # (K, 2) km
    beta: np.ndarray           # (K, L) linear
    pilot_index: np.ndarray    # (K,)
    seed: int

    @property
    def pilot_xcorr(self) -> np.ndarray:
        return xcorr_from_indices(self.pilot_index)

    @property
    def K(self) -> int:
        return self.beta.shape[0]

    @property
    def L(self) -> int:
        return self.beta.shape[1]

    def to_json(self) -> str:
        doc = {
            "format": "cfpower.scenario",
            "version": SCENARIO_FORMAT_VERSION,
            "seed": int(self.seed),
            "ap_positions_km": self.ap_positions.tolist(),
            "ue_positions_km": self.ue_positions.tolist(),
            "beta_db": (10 * np.log10(self.beta)).tolist(),
            "pilot_index": [int(i) for i in self.pilot_index],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        doc = json.loads(text)
        if doc.get("format") != "cfpower.scenario" or doc.get("version") != SCENARIO_FORMAT_VERSION:
            raise ValueError("not a version-1 cfpower scenario document")
        return cls(
            ap_positions=np.array(doc["ap_positions_km"], dtype=float),
            ue_positions=np.array(doc["ue_positions_km"], dtype=float),
            beta=10 ** (np.array(doc["beta_db"], dtype=float) / 10),
            pilot_index=np.array(doc["pilot_index"], dtype=int),
            seed=int(doc["seed"]),
        )


def generate_scenario(params: SystemParams, seed: int) -> Scenario:
    params.validate()
    K, L, side = params.num_ues, params.num_aps, params.area_side

    pos_rng = substream(seed, _STREAM_POSITIONS)
    ap_pos = pos_rng.uniform(0.0, side, size=(L, 2))
    ue_pos = pos_rng.uniform(0.0, side, size=(K, 2))

    pl_db = path_loss_db(wrap_distances(ue_pos, ap_pos, side), params)
    if params.sigma_sh > 0:
        z = substream(seed, _STREAM_SHADOWING).standard_normal((K, L))
        beta = 10 ** ((pl_db + params.sigma_sh * z) / 10)
    else:
        beta = 10 ** (pl_db / 10)

    pilots = draw_pilot_indices(K, params.tau_p, params.pilot_mode, substream(seed, _STREAM_PILOTS))
    return Scenario(ap_positions=ap_pos, ue_positions=ue_pos, beta=beta, pilot_index=pilots, seed=int(seed))


@dataclass(frozen=True)
class ChannelStats:
    c: np.ndarray       # (K, L) LMMSE scaling
    gamma: np.ndarray   # (K, L) mean-square of the channel estimate


def estimation_stats(beta: np.ndarray, xcorr: np.ndarray, tau_p: float, rho_p: float):
    """(c, gamma) for arrays shaped (..., K, L) and (..., K, K)."""
    snr = tau_p * rho_p
    contamination = np.einsum("...kj,...jl->...kl", xcorr, beta)
    c = math.sqrt(snr) * beta / (snr * contamination + 1.0)
    gamma = math.sqrt(snr) * beta * c
    return c, gamma


def channel_stats(s: Scenario, params: SystemParams) -> ChannelStats:
    c, gamma = estimation_stats(s.beta, s.pilot_xcorr, params.tau_p, params.rho_p)
    return ChannelStats(c=c, gamma=gamma)

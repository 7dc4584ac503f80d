"""System constants and their config-file loader.

Config files are JSON objects. Recognised keys (all optional, defaults in
brackets)::

    area_side        km               [1.0]
    num_aps          L                [20]
    num_ues          K                [8]
    tau_p            pilot symbols    [20]
    tau_c            block symbols    [200]
    sigma_sh         dB               [8.0]
    pilot_mode       "orthogonal" | "random"   ["orthogonal"]
    pathloss         {"d0": km, "d1": km, "L_const": dB}  [0.01, 0.05, 140.7]
    rho, rho_p       normalized SNRs (linear)
    uplink_power_mw, pilot_power_mw, bandwidth_hz, noise_figure_db
                     used to derive rho / rho_p when those are absent
                     [100, 100, 20e6, 9]
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

BOLTZMANN = 1.380649e-23
T0_KELVIN = 290.0


class ParamsError(ValueError):
    """Raised when a parameter set violates one of its invariants."""


def normalized_snr(power_mw: float, bandwidth_hz: float = 20e6, noise_figure_db: float = 9.0) -> float:
    """Transmit power over thermal noise power, both in watts."""
    noise_w = BOLTZMANN * T0_KELVIN * bandwidth_hz * 10 ** (noise_figure_db / 10)
    return power_mw * 1e-3 / noise_w


@dataclass(frozen=True)
class PathLoss:
    d0: float = 0.01
    d1: float = 0.05
    L_const: float = 140.7


@dataclass(frozen=True)
class SystemParams:
    area_side: float = 1.0
    num_aps: int = 20
    num_ues: int = 8
    tau_p: int = 20
    tau_c: int = 200
    rho_p: float = field(default_factory=lambda: normalized_snr(100.0))
    rho: float = field(default_factory=lambda: normalized_snr(100.0))
    sigma_sh: float = 8.0
    pathloss: PathLoss = field(default_factory=PathLoss)
    pilot_mode: str = "orthogonal"

    def __post_init__(self):
        self.validate()

    @property
    def L(self) -> int:
        return self.num_aps

    @property
    def K(self) -> int:
        return self.num_ues

    @property
    def se_prefactor(self) -> float:
        return 1.0 - self.tau_p / self.tau_c

    def validate(self) -> None:
        pl = self.pathloss
        checks = [
            (self.num_aps >= 1, "num_aps >= 1"),
            (self.num_ues >= 1, "num_ues >= 1"),
            (self.tau_p >= 1, "tau_p >= 1"),
            (self.tau_c > self.tau_p, "tau_c > tau_p"),
            (self.rho > 0 and math.isfinite(self.rho), "rho > 0"),
            (self.rho_p > 0 and math.isfinite(self.rho_p), "rho_p > 0"),
            (self.sigma_sh >= 0, "sigma_sh >= 0"),
            (self.area_side > 0, "area_side > 0"),
            (0 < pl.d0 < pl.d1 < self.area_side, "d0 < d1 < area_side"),
            (self.pilot_mode in ("orthogonal", "random"), "pilot_mode in {orthogonal, random}"),
            (self.pilot_mode != "orthogonal" or self.num_ues <= self.tau_p,
             "K <= tau_p when pilot_mode = orthogonal"),
        ]
        for ok, name in checks:
            if not ok:
                raise ParamsError(f"invalid SystemParams: violates {name}")

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "SystemParams":
        raw = dict(raw)
        power_keys = {
            k: raw.pop(k) for k in ("uplink_power_mw", "pilot_power_mw", "bandwidth_hz", "noise_figure_db")
            if k in raw
        }
        bw = power_keys.get("bandwidth_hz", 20e6)
        nf = power_keys.get("noise_figure_db", 9.0)
        if "rho" not in raw:
            raw["rho"] = normalized_snr(power_keys.get("uplink_power_mw", 100.0), bw, nf)
        if "rho_p" not in raw:
            raw["rho_p"] = normalized_snr(power_keys.get("pilot_power_mw", 100.0), bw, nf)
        if "pathloss" in raw:
            raw["pathloss"] = PathLoss(**raw["pathloss"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ParamsError(f"unknown SystemParams keys: {sorted(unknown)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ParamsError(str(exc)) from exc


def load_params(path) -> SystemParams:
    """Read a JSON config file into :class:`SystemParams`.

    A top-level ``"system"`` object is used when present, so the same file
    can also carry training and evaluation sections.
    """
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ParamsError(f"{path}: config must be a JSON object")
    return SystemParams.from_dict(raw.get("system", raw))

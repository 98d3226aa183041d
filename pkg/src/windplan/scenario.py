"""Problem data: buoys, radio link, airframe, slotting, endpoints and tolerances.

A :class:`Scenario` is an immutable bundle of everything the planners need.
Scenarios are normally read from a JSON file with :func:`load_scenario`; any
field left out of the file takes its default from :data:`DEFAULTS` and is
echoed back in the :class:`ValidationReport` so a run can be audited.

Schema (all keys optional except ``buoys``)::

    {
      "buoys": [{"id": 1, "position": [x, y], "target_bits": 2e8}, ...],
      "channel": {"bandwidth_hz": 1e6, "ref_snr_db": 70, "altitude_m": 100},
      "energy": {"w1": 9.26e-4, "w2": 2250, "gravity": 9.8, "mass_kg": 10},
      "limits": {"v_max": 50, "stall_speed": 3, "a_max": 5},
      "slotting": {"slot_s": 1.0, "n_slots": 60},
      "endpoints": {"q0": [x, y], "qF": [x, y], "v0": [vx, vy], "vF": [vx, vy]},
      "wind": {"mean": [wx, wy], "sigma_f": 0.0, "rho_c": 0.5},
      "tolerances": {"eps1": 1, "eps2": 1, "xi_q": 3, "xi_v": 0.2, "w3": 100},
      "saa_samples": 100
    }

``channel.ref_snr`` (linear) may be given instead of ``ref_snr_db``.
Without an ``endpoints`` block the scenario describes a closed lap.  With
endpoints but no ``v0``/``vF`` the two endpoint airspeeds are free but
constrained equal, so the kinetic-energy term vanishes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .wind import WindModel

Vector2 = tuple[float, float]

DEFAULTS: dict[str, Any] = {
    "channel.bandwidth_hz": 1.0e6,
    "channel.ref_snr_db": 70.0,
    "channel.altitude_m": 100.0,
    "energy.w1": 9.26e-4,
    "energy.w2": 2250.0,
    "energy.gravity": 9.8,
    "energy.mass_kg": 10.0,
    "limits.v_max": 50.0,
    "limits.stall_speed": 3.0,
    "limits.a_max": 5.0,
    "slotting.slot_s": 1.0,
    "slotting.n_slots": 60,
    "wind.mean": (0.0, 0.0),
    "wind.sigma_f": 0.0,
    "wind.rho_c": 0.5,
    "tolerances.eps1": 1.0,
    "tolerances.eps2": 1.0,
    "tolerances.xi_q": 3.0,
    "tolerances.xi_v": 0.2,
    "tolerances.w3": 100.0,
    "saa_samples": 100,
    "buoy.target_bits": 0.0,
}


class ScenarioError(ValueError):
    """Scenario file is malformed or violates an invariant."""


class ScenarioParseError(ScenarioError):
    pass


@dataclass(frozen=True)
class Buoy:
    id: int
    position: Vector2
    target_volume: float  # bits


@dataclass(frozen=True)
class ChannelParams:
    bandwidth_hz: float
    ref_snr: float  # linear, lumps transmit power, reference gain, noise and gap
    altitude_m: float


@dataclass(frozen=True)
class EnergyParams:
    w1: float
    w2: float
    gravity: float = 9.8
    mass_kg: float = 10.0


@dataclass(frozen=True)
class FlightLimits:
    v_max: float
    stall_speed: float
    a_max: float

    def v_min(self, wind: Any = (0.0, 0.0)) -> float:
        """Minimum admissible airspeed, max(|wind|, stall speed)."""
        return max(float(np.hypot(*np.asarray(wind, dtype=float)[:2])), self.stall_speed)


@dataclass(frozen=True)
class Slotting:
    slot_s: float
    n_slots: int

    @property
    def horizon(self) -> float:
        return (self.n_slots + 1) * self.slot_s


@dataclass(frozen=True)
class Endpoints:
    q0: Vector2
    qF: Vector2
    v0: Vector2 | None = None
    vF: Vector2 | None = None

    @property
    def free_equal(self) -> bool:
        return self.v0 is None and self.vF is None


@dataclass(frozen=True)
class Tolerances:
    eps1: float = 1.0
    eps2: float = 1.0
    xi_q: float = 3.0
    xi_v: float = 0.2
    w3: float = 100.0  # J per Mbit of relaxed throughput


@dataclass(frozen=True)
class Scenario:
    buoys: tuple[Buoy, ...]
    channel: ChannelParams
    energy: EnergyParams
    limits: FlightLimits
    slotting: Slotting
    endpoints: Endpoints | None
    wind: WindModel
    tolerances: Tolerances = field(default_factory=Tolerances)
    saa_samples: int = 100

    @property
    def closed(self) -> bool:
        return self.endpoints is None

    @property
    def K(self) -> int:
        return len(self.buoys)

    @property
    def buoy_positions(self) -> np.ndarray:
        return np.array([b.position for b in self.buoys], dtype=float).reshape(-1, 2)

    @property
    def targets(self) -> np.ndarray:
        return np.array([b.target_volume for b in self.buoys], dtype=float)

    @property
    def center(self) -> np.ndarray:
        return self.buoy_positions.mean(axis=0)

    def v_min(self, wind: Any = None) -> float:
        if wind is None:
            wind = self.wind.mean
        return self.limits.v_min(wind)

    def with_targets(self, bits: float | list[float]) -> "Scenario":
        bits = np.broadcast_to(np.asarray(bits, dtype=float), (self.K,))
        buoys = tuple(replace(b, target_volume=float(t)) for b, t in zip(self.buoys, bits))
        return replace(self, buoys=buoys)

    def with_wind(self, mean: Vector2 | None = None, sigma_f: float | None = None,
                  rho_c: float | None = None) -> "Scenario":
        w = self.wind
        return replace(self, wind=WindModel(
            mean=tuple(map(float, mean)) if mean is not None else w.mean,
            sigma_f=w.sigma_f if sigma_f is None else float(sigma_f),
            rho_c=w.rho_c if rho_c is None else float(rho_c)))

    def with_slotting(self, slot_s: float, n_slots: int) -> "Scenario":
        return replace(self, slotting=Slotting(float(slot_s), int(n_slots)))


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    defaults_used: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _finite(x) -> bool:
    return bool(np.all(np.isfinite(np.asarray(x, dtype=float))))


def validate_scenario(s: Scenario) -> ValidationReport:
    """List every violated invariant of ``s``; an empty list means usable."""
    v: list[str] = []
    if not s.buoys:
        v.append("buoys empty")
    ids = [b.id for b in s.buoys]
    if len(set(ids)) != len(ids):
        v.append("buoys: ids not unique")
    for i, b in enumerate(s.buoys):
        if not _finite(b.position) or len(b.position) != 2:
            v.append(f"buoys[{i}].position must be two finite numbers")
        if not _finite(b.target_volume) or b.target_volume < 0:
            v.append(f"buoys[{i}].target_volume must be >= 0 (Buoy)")
    ch = s.channel
    for name in ("bandwidth_hz", "ref_snr", "altitude_m"):
        val = getattr(ch, name)
        if not _finite(val) or val <= 0:
            v.append(f"channel.{name} must be > 0 (ChannelParams)")
    e = s.energy
    for name in ("w1", "w2", "gravity"):
        val = getattr(e, name)
        if not _finite(val) or val <= 0:
            v.append(f"energy.{name} must be > 0 (EnergyParams)")
    if not _finite(e.mass_kg) or e.mass_kg < 0:
        v.append("energy.mass_kg must be >= 0 (EnergyParams)")
    lim = s.limits
    if not (_finite([lim.stall_speed, lim.v_max]) and 0 < lim.stall_speed < lim.v_max):
        v.append("limits: need 0 < stall_speed < v_max (FlightLimits)")
    if not _finite(lim.a_max) or lim.a_max <= 0:
        v.append("limits.a_max must be > 0 (FlightLimits)")
    sl = s.slotting
    if not _finite(sl.slot_s) or sl.slot_s <= 0:
        v.append("slotting.slot_s must be > 0 (Slotting)")
    if int(sl.n_slots) != sl.n_slots or sl.n_slots < 1:
        v.append("slotting.n_slots must be an integer >= 1 (Slotting)")
    ep = s.endpoints
    if ep is not None:
        for name in ("q0", "qF"):
            if not _finite(getattr(ep, name)):
                v.append(f"endpoints.{name} must be finite (Endpoints)")
        if (ep.v0 is None) != (ep.vF is None):
            v.append("endpoints: give both v0 and vF or neither (Endpoints)")
        for name in ("v0", "vF"):
            vec = getattr(ep, name)
            if vec is None:
                continue
            speed = float(np.hypot(*vec)) if _finite(vec) else math.nan
            if not (lim.stall_speed <= speed <= lim.v_max):
                v.append(f"endpoints.{name} speed must lie in [stall_speed, v_max] (Endpoints)")
    w = s.wind
    if not _finite(w.mean):
        v.append("wind.mean must be finite (WindModel)")
    if not _finite(w.sigma_f) or w.sigma_f < 0:
        v.append("wind.sigma_f must be >= 0 (WindModel)")
    if not _finite(w.rho_c) or not (0 <= w.rho_c < 1):
        v.append("wind.rho_c must lie in [0, 1) (WindModel)")
    t = s.tolerances
    for name in ("eps1", "eps2", "xi_q", "xi_v", "w3"):
        val = getattr(t, name)
        if not _finite(val) or val < 0:
            v.append(f"tolerances.{name} must be >= 0")
    if s.saa_samples < 1:
        v.append("saa_samples must be >= 1")
    return ValidationReport(violations=v)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def _vec(x, where: str) -> Vector2:
    try:
        a, b = (float(c) for c in x)
    except (TypeError, ValueError):
        raise ScenarioParseError(f"{where}: expected a pair of numbers, got {x!r}") from None
    return (a, b)


def scenario_from_dict(d: dict) -> tuple[Scenario, ValidationReport]:
    """Build a scenario from parsed JSON, filling defaults; does not raise on
    invariant violations (see the returned report)."""
    if not isinstance(d, dict):
        raise ScenarioParseError("scenario root must be an object")
    used: list[str] = []

    def get(section: str, key: str, conv=float):
        block = d.get(section) or {}
        if not isinstance(block, dict):
            raise ScenarioParseError(f"{section} must be an object")
        if key in block:
            try:
                return conv(block[key])
            except (TypeError, ValueError):
                raise ScenarioParseError(f"{section}.{key}: bad value {block[key]!r}") from None
        used.append(f"{section}.{key}")
        return conv(DEFAULTS[f"{section}.{key}"])

    raw_buoys = d.get("buoys")
    if raw_buoys is None:
        raise ScenarioParseError("missing required key 'buoys'")
    if not isinstance(raw_buoys, list):
        raise ScenarioParseError("buoys must be a list")
    buoys = []
    for i, b in enumerate(raw_buoys):
        if "position" not in b:
            raise ScenarioParseError(f"buoys[{i}]: missing position")
        if "target_bits" not in b:
            used.append(f"buoys[{i}].target_bits")
        buoys.append(Buoy(id=int(b.get("id", i + 1)),
                          position=_vec(b["position"], f"buoys[{i}].position"),
                          target_volume=float(b.get("target_bits", DEFAULTS["buoy.target_bits"]))))

    ch_block = d.get("channel") or {}
    if "ref_snr" in ch_block:
        ref_snr = float(ch_block["ref_snr"])
    else:
        ref_snr = db_to_linear(get("channel", "ref_snr_db"))
    channel = ChannelParams(bandwidth_hz=get("channel", "bandwidth_hz"), ref_snr=ref_snr,
                            altitude_m=get("channel", "altitude_m"))
    energy = EnergyParams(w1=get("energy", "w1"), w2=get("energy", "w2"),
                          gravity=get("energy", "gravity"), mass_kg=get("energy", "mass_kg"))
    limits = FlightLimits(v_max=get("limits", "v_max"), stall_speed=get("limits", "stall_speed"),
                          a_max=get("limits", "a_max"))
    slotting = Slotting(slot_s=get("slotting", "slot_s"), n_slots=get("slotting", "n_slots", int))

    endpoints = None
    if d.get("endpoints") is not None:
        ep = d["endpoints"]
        for key in ("q0", "qF"):
            if key not in ep:
                raise ScenarioParseError(f"endpoints: missing {key}")
        endpoints = Endpoints(
            q0=_vec(ep["q0"], "endpoints.q0"), qF=_vec(ep["qF"], "endpoints.qF"),
            v0=_vec(ep["v0"], "endpoints.v0") if ep.get("v0") is not None else None,
            vF=_vec(ep["vF"], "endpoints.vF") if ep.get("vF") is not None else None)

    wind = WindModel(mean=get("wind", "mean", lambda x: _vec(x, "wind.mean")),
                     sigma_f=get("wind", "sigma_f"), rho_c=get("wind", "rho_c"))
    tol = Tolerances(**{k: get("tolerances", k) for k in ("eps1", "eps2", "xi_q", "xi_v", "w3")})
    if "saa_samples" in d:
        saa = int(d["saa_samples"])
    else:
        used.append("saa_samples")
        saa = int(DEFAULTS["saa_samples"])

    s = Scenario(buoys=tuple(buoys), channel=channel, energy=energy, limits=limits,
                 slotting=slotting, endpoints=endpoints, wind=wind, tolerances=tol,
                 saa_samples=saa)
    report = validate_scenario(s)
    report.defaults_used = used
    return s, report


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario file.

    Raises
    ------
    FileNotFoundError
        The path does not exist.
    ScenarioParseError
        The file is not valid JSON or does not follow the schema.
    ScenarioError
        The scenario parses but violates an invariant; the message names
        the offending fields.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from None
    s, report = scenario_from_dict(d)
    if not report.ok:
        raise ScenarioError("; ".join(report.violations))
    return s


def scenario_to_dict(s: Scenario) -> dict:
    out: dict[str, Any] = {
        "buoys": [{"id": b.id, "position": list(b.position), "target_bits": b.target_volume}
                  for b in s.buoys],
        "channel": {"bandwidth_hz": s.channel.bandwidth_hz, "ref_snr": s.channel.ref_snr,
                    "altitude_m": s.channel.altitude_m},
        "energy": {"w1": s.energy.w1, "w2": s.energy.w2, "gravity": s.energy.gravity,
                   "mass_kg": s.energy.mass_kg},
        "limits": {"v_max": s.limits.v_max, "stall_speed": s.limits.stall_speed,
                   "a_max": s.limits.a_max},
        "slotting": {"slot_s": s.slotting.slot_s, "n_slots": s.slotting.n_slots},
        "wind": {"mean": list(s.wind.mean), "sigma_f": s.wind.sigma_f, "rho_c": s.wind.rho_c},
        "tolerances": {"eps1": s.tolerances.eps1, "eps2": s.tolerances.eps2,
                       "xi_q": s.tolerances.xi_q, "xi_v": s.tolerances.xi_v,
                       "w3": s.tolerances.w3},
        "saa_samples": s.saa_samples,
    }
    if s.endpoints is not None:
        ep = s.endpoints
        out["endpoints"] = {"q0": list(ep.q0), "qF": list(ep.qF),
                            "v0": list(ep.v0) if ep.v0 is not None else None,
                            "vF": list(ep.vF) if ep.vF is not None else None}
    return out


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=2))

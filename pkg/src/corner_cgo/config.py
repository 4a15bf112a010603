"""Experiment configuration: JSON files in, validated ``ExperimentConfig`` out.

The file is a single JSON object. Scalars describing the geometry and the
phase sit at the top level; media, incident field and per-command options
are nested objects. Unknown keys are rejected at every level, and every
embedded model is rebuilt at load time so its own checks run.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .analytic import PhaseParams, SectorDomain
from .corner import DEFAULT_H_GRID, IncidentFieldModel, MediumModel
from .errors import ConfigurationError, DomainError, PreconditionError
from .quadrature import DEFAULT_GAUSS, DEFAULT_NR, DEFAULT_NTHETA
from .verdict import IncidentDescriptor, NonScatteringWitness

__all__ = ["COMMANDS", "ExperimentConfig", "load_config", "config_from_dict", "emit", "save_config"]

COMMANDS = ("cgo-build", "rate-sweep", "constants", "verdict", "witness", "verify-lemma")

# typed decimals cannot hit π/2 exactly, so inputs this close to it are treated as π/2
THETA0_INPUT_TOL = 1e-4

DEFAULT_TOLERANCES = {
    "slope_rel": 0.03,
    "r_squared": 0.99,
    "residual": 5e-2,
    "witness": 1e-12,
    "gamma_quad": 1e-10,
    "cauchy": 2e-2,
    "smapping_slope_min": 0.75,
    "smapping_slope_max": 1.25,
}

COMMAND_H_GRIDS = {
    "cgo-build": (0.2, 0.1, 0.05),
    "rate-sweep": DEFAULT_H_GRID,
    "constants": (),
    "verdict": (),
    "witness": (),
    "verify-lemma": (0.2, 0.1, 0.05, 0.025),
}

MEDIA_KEYS = {"c1", "c2", "beta1", "beta2", "C1", "C2", "profile", "k"}
INCIDENT_KEYS = {"k", "terms"}
DESCRIPTOR_KEYS = {"value_nonzero", "gradient_nonzero", "N0", "matches_excluded"}
RATE_DEFAULTS = {"quantity": "moment", "beta": 0.0, "n": 0, "j": 1}
WITNESS_DEFAULTS = {"k1": 1, "k2": 1, "a0": 2.0, "a1": 1.0, "a2": 1.0, "n_samples": 1000, "seed": 0}
CONSTANTS_DEFAULTS = {"theta0_grid": None}
LEMMA_DEFAULTS = {"smapping_p": 2.0, "cauchy_resolution": [128, 96]}


def _complex_from_json(x, where: str) -> complex:
    if isinstance(x, bool):
        raise ConfigurationError(f"{where}: expected a number, got a boolean")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise ConfigurationError(f"{where}: complex values are numbers or [re, im] pairs")


def _complex_to_json(z: complex):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def _check_keys(obj, allowed: set, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{where} must be a JSON object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    return obj


def _merge(defaults: dict, given, where: str) -> dict:
    out = copy.deepcopy(defaults)
    if given is not None:
        out.update(_check_keys(given, set(defaults), where))
    return out


def _number(x, where: str, integer: bool = False):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigurationError(f"{where} must be a number")
    if integer and int(x) != x:
        raise ConfigurationError(f"{where} must be an integer")
    return int(x) if integer else float(x)


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment. ``h_grid`` is ordered from coarse to fine."""

    command: str
    theta0: float = math.pi / 3
    radius_a: float = 1.0
    alpha: float = 0.5
    h: float = 0.1
    h_grid: tuple[float, ...] = ()
    grid_resolution: tuple[int, int] = (DEFAULT_NR, DEFAULT_NTHETA)
    q: float = 1.0
    media: dict | None = None
    incident: dict = field(default_factory=lambda: {"k": 1.0, "terms": [[0, 1.0, 0.0]]})
    descriptor: dict | None = None
    rate: dict = field(default_factory=lambda: dict(RATE_DEFAULTS))
    witness: dict = field(default_factory=lambda: dict(WITNESS_DEFAULTS))
    constants: dict = field(default_factory=lambda: dict(CONSTANTS_DEFAULTS))
    lemma: dict = field(default_factory=lambda: copy.deepcopy(LEMMA_DEFAULTS))
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output_path: str = "out"
    threads: int = 0

    # -- embedded models -----------------------------------------------------
    def sector(self) -> SectorDomain:
        return SectorDomain(self.theta0, self.radius_a)

    def phase(self, h: float | None = None) -> PhaseParams:
        return PhaseParams(self.alpha, self.h if h is None else h)

    def media_model(self) -> MediumModel | None:
        return None if self.media is None else MediumModel(**self.media)

    def incident_model(self) -> IncidentFieldModel:
        terms = tuple(
            (int(m), _complex_from_json(a, "incident.terms"), _complex_from_json(b, "incident.terms"))
            for m, a, b in self.incident["terms"]
        )
        return IncidentFieldModel(float(self.incident["k"]), terms)

    def descriptor_model(self) -> IncidentDescriptor | None:
        return None if self.descriptor is None else IncidentDescriptor(**self.descriptor)

    def witness_model(self) -> NonScatteringWitness:
        w = self.witness
        return NonScatteringWitness(w["k1"], w["k2"], w["a0"], w["a1"], w["a2"])

    def theta0_grid(self) -> tuple[float, ...]:
        g = self.constants.get("theta0_grid")
        return (self.theta0,) if g is None else tuple(float(x) for x in g)

    def validate(self) -> None:
        """Rebuild every embedded model so its invariants are checked."""
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")
        for th in (self.theta0, *self.theta0_grid()):
            if abs(th - math.pi / 2) < THETA0_INPUT_TOL:
                raise ConfigurationError("theta0 must differ from π/2 (aperture π is not a corner)")
            SectorDomain(th, self.radius_a)
        self.phase()
        for h in self.h_grid:
            self.phase(h)
        if len(set(self.h_grid)) != len(self.h_grid):
            raise ConfigurationError("h_grid values must be distinct")
        nr, nt = self.grid_resolution
        if nr < 8 or nt < 8:
            raise ConfigurationError("grid_resolution entries must be at least 8")
        if nr % DEFAULT_GAUSS:
            raise ConfigurationError(f"grid_resolution nr={nr} must be a multiple of {DEFAULT_GAUSS}")
        if not math.isfinite(self.q):
            raise ConfigurationError("q must be a finite number")
        self.media_model()
        self.incident_model()
        self.descriptor_model()
        if self.command == "witness":
            self.witness_model()
        if self.rate["quantity"] not in ("moment", "corner-integral"):
            raise ConfigurationError("rate.quantity must be 'moment' or 'corner-integral'")
        if self.rate["j"] not in (1, 2):
            raise ConfigurationError("rate.j must be 1 or 2")
        if self.rate["beta"] <= -2:
            raise ConfigurationError("rate.beta must exceed -2")
        if self.command == "rate-sweep" and self.rate["quantity"] == "corner-integral" and self.media is None:
            raise ConfigurationError("a corner-integral sweep needs a media section")
        if self.command in ("cgo-build", "rate-sweep", "constants"):
            for th in self.theta0_grid() if self.command == "constants" else (self.theta0,):
                self.phase().check_sector(SectorDomain(th, self.radius_a))
        if self.threads < 0:
            raise ConfigurationError("threads must be non-negative (0 = auto)")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else copy.deepcopy(v)
        return out


def _terms_from_json(terms) -> list:
    if not isinstance(terms, list) or not terms:
        raise ConfigurationError("incident.terms must be a non-empty list of [m, a, b]")
    out = []
    for t in terms:
        if not isinstance(t, list) or len(t) != 3:
            raise ConfigurationError("each incident term is [m, a, b]")
        m = _number(t[0], "incident term order", integer=True)
        a = _complex_to_json(_complex_from_json(t[1], "incident term a"))
        b = _complex_to_json(_complex_from_json(t[2], "incident term b"))
        out.append([m, a, b])
    return out


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a decoded JSON object and fill defaults."""
    allowed = {f.name for f in fields(ExperimentConfig)}
    _check_keys(raw, allowed, "config")
    if "command" not in raw:
        raise ConfigurationError("config needs a 'command'")
    cmd = raw["command"]
    if cmd not in COMMANDS:
        raise ConfigurationError(f"unknown command {cmd!r}; choose from {', '.join(COMMANDS)}")
    kw: dict = {"command": cmd}
    for name in ("theta0", "radius_a", "alpha", "h", "q"):
        if name in raw:
            kw[name] = _number(raw[name], name)
    if "threads" in raw:
        kw["threads"] = _number(raw["threads"], "threads", integer=True)
    if "output_path" in raw:
        if not isinstance(raw["output_path"], str):
            raise ConfigurationError("output_path must be a string")
        kw["output_path"] = raw["output_path"]
    hg = raw.get("h_grid")
    if hg is None:
        kw["h_grid"] = tuple(COMMAND_H_GRIDS[cmd])
    else:
        if not isinstance(hg, list):
            raise ConfigurationError("h_grid must be a list of numbers")
        kw["h_grid"] = tuple(sorted((_number(x, "h_grid entry") for x in hg), reverse=True))
    if "grid_resolution" in raw:
        gr = raw["grid_resolution"]
        if not isinstance(gr, list) or len(gr) != 2:
            raise ConfigurationError("grid_resolution must be [nr, ntheta]")
        kw["grid_resolution"] = tuple(_number(x, "grid_resolution entry", integer=True) for x in gr)
    if raw.get("media") is not None:
        media = dict(_check_keys(raw["media"], MEDIA_KEYS, "media"))
        for key in MEDIA_KEYS - {"profile"}:
            if key in media:
                media[key] = _number(media[key], f"media.{key}")
        if "profile" in media and not isinstance(media["profile"], str):
            raise ConfigurationError("media.profile must be a string")
        if "c1" not in media or "c2" not in media:
            raise ConfigurationError("media needs c1 and c2")
        kw["media"] = media
    if "incident" in raw:
        inc = _check_keys(raw["incident"], INCIDENT_KEYS, "incident")
        kw["incident"] = {"k": _number(inc.get("k", 1.0), "incident.k"), "terms": _terms_from_json(inc.get("terms"))}
    if raw.get("descriptor") is not None:
        d = _check_keys(raw["descriptor"], DESCRIPTOR_KEYS, "descriptor")
        for key in ("value_nonzero", "gradient_nonzero", "matches_excluded"):
            if key in d and not isinstance(d[key], bool):
                raise ConfigurationError(f"descriptor.{key} must be true or false")
        if "value_nonzero" not in d or "gradient_nonzero" not in d:
            raise ConfigurationError("descriptor needs value_nonzero and gradient_nonzero")
        kw["descriptor"] = dict(d)
    kw["rate"] = _merge(RATE_DEFAULTS, raw.get("rate"), "rate")
    kw["witness"] = _merge(WITNESS_DEFAULTS, raw.get("witness"), "witness")
    kw["constants"] = _merge(CONSTANTS_DEFAULTS, raw.get("constants"), "constants")
    kw["lemma"] = _merge(LEMMA_DEFAULTS, raw.get("lemma"), "lemma")
    kw["tolerances"] = _merge(DEFAULT_TOLERANCES, raw.get("tolerances"), "tolerances")
    for key in ("n", "j"):
        kw["rate"][key] = _number(kw["rate"][key], f"rate.{key}", integer=True)
    kw["rate"]["beta"] = _number(kw["rate"]["beta"], "rate.beta")
    for key in ("k1", "k2", "n_samples", "seed"):
        kw["witness"][key] = _number(kw["witness"][key], f"witness.{key}", integer=True)
    for key in ("a0", "a1", "a2"):
        kw["witness"][key] = _number(kw["witness"][key], f"witness.{key}")
    for key, val in kw["tolerances"].items():
        kw["tolerances"][key] = _number(val, f"tolerances.{key}")
    cfg = ExperimentConfig(**kw)
    try:
        cfg.validate()
    except (PreconditionError, DomainError) as exc:
        raise ConfigurationError(str(exc)) from exc
    return cfg


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file.

    Syntax errors are reported as ``path:line:column: message``.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return config_from_dict(raw)


def emit(cfg: ExperimentConfig) -> str:
    """Serialise a config so that ``config_from_dict(json.loads(emit(c))) == c``."""
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(emit(cfg) + "\n", encoding="utf-8")

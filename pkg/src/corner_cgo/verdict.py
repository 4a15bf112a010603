"""Scattering verdicts at a corner and the rectangle non-scattering witness.

``classify`` walks the decision table for a corner of aperture 2θ0 given the
essential jumps (c1, c2), the perturbation order β1 of γ and the local
behaviour of the incident field. ``rectangle_witness`` builds the explicit
incident wave on the square (0, π)² that produces no scattered field for
γ = ρ = a0, and ``witness_cross_check`` verifies it by dense sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corner import (
    ANGLE_TOL,
    IncidentFieldModel,
    MediumModel,
    angle_vanishing,
    c0_coeff,
    taylor_leading,
)
from .errors import ConfigurationError, PreconditionError

__all__ = [
    "IncidentDescriptor",
    "CornerSpec",
    "ScatterVerdict",
    "ITEM_TAGS",
    "classify",
    "matches_excluded_expansion",
    "NonScatteringWitness",
    "WitnessReport",
    "rectangle_witness",
    "witness_cross_check",
]

ITEM_TAGS = ("I-a", "I-b", "I-c", "II-a", "II-b", "II-c-i", "II-c-ii")
OUTCOMES = ("AlwaysScatters", "Inconclusive", "ExcludedClass")
EXCLUDED_REFERENCE = "II-c display"
EXCLUDED_RTOL = 1e-10
JUMP_RTOL = 1e-12
WITNESS_TOL = 1e-12


# ---------------------------------------------------------------------------
# corner descriptors


@dataclass(frozen=True)
class IncidentDescriptor:
    """Local behaviour of v at the corner, without a concrete field.

    ``N0`` is the vanishing order of v; ``matches_excluded`` records whether
    v has the excluded expansion (only consulted in the II-c-ii branch).
    """

    value_nonzero: bool
    gradient_nonzero: bool
    N0: int = 0
    matches_excluded: bool = False

    def __post_init__(self):
        if int(self.N0) != self.N0 or self.N0 < 0:
            raise ConfigurationError(f"N0 must be a non-negative integer, got {self.N0}")
        if self.value_nonzero and self.N0 != 0:
            raise ConfigurationError("v(0) != 0 forces N0 = 0")
        if not self.value_nonzero:
            if self.N0 == 0:
                raise ConfigurationError("v(0) = 0 needs N0 >= 1")
            if self.gradient_nonzero != (self.N0 == 1):
                raise ConfigurationError("with v(0) = 0, the gradient is non-zero exactly when N0 = 1")


@dataclass(frozen=True)
class CornerSpec:
    """A corner of aperture 2·theta0 with the medium and incident data at its vertex."""

    theta0: float
    media: MediumModel
    incident: IncidentFieldModel | IncidentDescriptor

    def __post_init__(self):
        if not (0.0 < self.theta0 < math.pi):
            raise ConfigurationError(f"theta0 must lie in (0, π), got {self.theta0}")
        if abs(self.theta0 - math.pi / 2) < ANGLE_TOL:
            raise ConfigurationError("theta0 must differ from π/2 (aperture π is not a corner)")
        if not isinstance(self.media, MediumModel):
            raise ConfigurationError("media must be a MediumModel")
        if not isinstance(self.incident, (IncidentFieldModel, IncidentDescriptor)):
            raise ConfigurationError("incident must be an IncidentFieldModel or an IncidentDescriptor")

    @property
    def aperture(self) -> float:
        return 2.0 * self.theta0

    @property
    def effective_beta1(self) -> float:
        """Order of γ^{-1/2}(γ-1) - c1 at the vertex; infinite when the perturbation is absent."""
        m = self.media
        return m.beta1 if (m.perturbed and m.C1 != 0) else math.inf

    def descriptor(self) -> IncidentDescriptor:
        """Abstract descriptors, derived via the Taylor data for a concrete field."""
        if isinstance(self.incident, IncidentDescriptor):
            return self.incident
        tl = taylor_leading(self.incident)
        excluded = False
        if tl.N0 == 0 and tl.N >= 1 and self.media.c1 != 0 and not _right_angle(self.theta0):
            excluded = matches_excluded_expansion(self.incident, self.media.c1, self.media.c2, self.theta0)
        return IncidentDescriptor(tl.N0 == 0, tl.N == 0, tl.N0, excluded)


def _right_angle(theta0: float) -> bool:
    """Aperture π/2 or 3π/2."""
    return abs(math.cos(2.0 * theta0)) < ANGLE_TOL


def matches_excluded_expansion(v: IncidentFieldModel, c1: float, c2: float, theta0: float) -> bool:
    """True when v = v0 J0 + c0 v0 J2 (e^{2iθ} + e^{-2iθ}) + (even-order tail).

    The m = 0 and m = 2 coefficients are compared against (v0, c0 v0) to
    1e-10 relative and every odd-order coefficient must vanish.
    """
    v0, _ = v.coefficient(0)
    if v0 == 0:
        return False
    c0 = c0_coeff(c1, c2, theta0)
    a2, b2 = v.coefficient(2)
    target = c0 * v0
    scale = max(abs(v0), abs(target))
    if abs(a2 - target) > EXCLUDED_RTOL * scale or abs(b2 - target) > EXCLUDED_RTOL * scale:
        return False
    return all(m % 2 == 0 for m in v.orders)


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class ScatterVerdict:
    """Outcome of the decision table; ``item_tag`` is set exactly for AlwaysScatters."""

    outcome: str
    item_tag: str | None = None
    reason: str = ""
    reference: str | None = None

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ConfigurationError(f"unknown outcome {self.outcome!r}")
        if (self.outcome == "AlwaysScatters") != (self.item_tag is not None):
            raise ConfigurationError("item_tag is present iff the outcome is AlwaysScatters")
        if self.item_tag is not None and self.item_tag not in ITEM_TAGS:
            raise ConfigurationError(f"unknown item tag {self.item_tag!r}")

    @classmethod
    def scatters(cls, tag: str, reason: str = "") -> "ScatterVerdict":
        return cls("AlwaysScatters", tag, reason)

    @classmethod
    def inconclusive(cls, reason: str) -> "ScatterVerdict":
        return cls("Inconclusive", None, reason)

    @classmethod
    def excluded(cls, reference: str = EXCLUDED_REFERENCE) -> "ScatterVerdict":
        return cls("ExcludedClass", None, "incident field has the excluded expansion", reference)

    @property
    def always_scatters(self) -> bool:
        return self.outcome == "AlwaysScatters"

    def csv_row(self) -> list[str]:
        return [self.outcome, self.item_tag or "", self.reason if self.outcome != "ExcludedClass" else self.reference]


def _classify_c1_zero(spec: CornerSpec, d: IncidentDescriptor) -> ScatterVerdict:
    b1 = spec.effective_beta1
    if b1 > 2:
        return ScatterVerdict.scatters("I-a", "c1 = 0, c2 != 0, beta1 > 2")
    if b1 > 1 and d.value_nonzero:
        return ScatterVerdict.scatters("I-b", "c1 = 0, c2 != 0, beta1 > 1, v(0) != 0")
    if d.value_nonzero and not d.gradient_nonzero:
        return ScatterVerdict.scatters("I-c", "c1 = 0, c2 != 0, v(0) != 0, grad v(0) = 0")
    if not d.value_nonzero:
        return ScatterVerdict.inconclusive("c1 = 0 with beta1 <= 2 needs v(0) != 0")
    return ScatterVerdict.inconclusive("c1 = 0 with beta1 <= 1 needs grad v(0) = 0")


def _classify_c1_nonzero(spec: CornerSpec, d: IncidentDescriptor) -> ScatterVerdict:
    m = spec.media
    if d.value_nonzero and d.gradient_nonzero:
        return ScatterVerdict.scatters("II-a", "c1 != 0, v(0) != 0, grad v(0) != 0")
    if not d.value_nonzero:
        l = angle_vanishing(spec.theta0, d.N0 - 1)
        if l is None:
            return ScatterVerdict.scatters("II-b", f"c1 != 0, v(0) = 0, 2θ0 != lπ/N0 (N0 = {d.N0})")
        return ScatterVerdict.inconclusive(f"resonant aperture 2θ0 = lπ/N0 with l = {l}, N0 = {d.N0}")
    if _right_angle(spec.theta0):
        if not math.isclose(m.c1, m.c2, rel_tol=JUMP_RTOL, abs_tol=0.0):
            return ScatterVerdict.scatters("II-c-i", "aperture π/2 or 3π/2 with c1 != c2")
        return ScatterVerdict.inconclusive("aperture π/2 or 3π/2 with equal jumps c1 = c2")
    if d.matches_excluded:
        return ScatterVerdict.excluded()
    return ScatterVerdict.scatters("II-c-ii", "v(0) != 0, grad v(0) = 0, expansion differs from the excluded form")


def classify(spec: CornerSpec) -> ScatterVerdict:
    """Run the decision table on a CornerSpec."""
    if not isinstance(spec, CornerSpec):
        raise ConfigurationError("classify expects a CornerSpec")
    c1, c2 = spec.media.c1, spec.media.c2
    if c1 == 0 and c2 == 0:
        return ScatterVerdict.inconclusive("no jump at corner")
    d = spec.descriptor()
    if c1 == 0:
        return _classify_c1_zero(spec, d)
    return _classify_c1_nonzero(spec, d)


# ---------------------------------------------------------------------------
# the rectangle witness


def _ss(k1, k2, x1, x2):
    return np.sin(k1 * x1) * np.sin(k2 * x2)


def _cc(k1, k2, x1, x2):
    return np.cos(k1 * x1) * np.cos(k2 * x2)


def _grad_ss(k1, k2, x1, x2):
    return np.stack([k1 * np.cos(k1 * x1) * np.sin(k2 * x2), k2 * np.sin(k1 * x1) * np.cos(k2 * x2)], axis=-1)


def _grad_cc(k1, k2, x1, x2):
    return np.stack([-k1 * np.sin(k1 * x1) * np.cos(k2 * x2), -k2 * np.cos(k1 * x1) * np.sin(k2 * x2)], axis=-1)


@dataclass(frozen=True)
class NonScatteringWitness:
    """Incident wave on D = (0, π)² that does not scatter from γ = ρ = a0 in D.

    Every field is p·sin(k1x1)sin(k2x2) + q·cos(k1x1)cos(k2x2); the pairs
    (p, q) are stored in ``coefficients``.
    """

    k1: int
    k2: int
    a0: float
    a1: float
    a2: float
    coefficients: dict = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("k1", "k2"):
            val = getattr(self, name)
            if isinstance(val, bool) or int(val) != val or val < 1:
                raise PreconditionError(f"{name} must be a positive integer, got {val}")
            object.__setattr__(self, name, int(val))
        if not self.a0 > 0:
            raise PreconditionError("a0 must be positive")
        if self.a0 == 1:
            raise PreconditionError("a0 = 1 gives no inhomogeneity")
        if self.a1 == 0 and self.a2 == 0:
            raise PreconditionError("a1 and a2 must not both vanish")
        a0, a1, a2 = float(self.a0), float(self.a1), float(self.a2)
        object.__setattr__(
            self,
            "coefficients",
            {
                "u_in": (a1, a2),
                "u_total": (a1 / a0, a2),
                "wD": (a1 * (1.0 / a0 - 1.0), 0.0),
                "wN": (0.0, a2 * (a0 - 1.0)),
            },
        )

    @property
    def k(self) -> float:
        return math.sqrt(self.k1**2 + self.k2**2)

    def expression(self, name: str) -> str:
        p, q = self.coefficients[name]
        return f"{p!r}*sin({self.k1}*x1)*sin({self.k2}*x2) + {q!r}*cos({self.k1}*x1)*cos({self.k2}*x2)"

    def evaluate(self, name: str, x1, x2):
        p, q = self.coefficients[name]
        return p * _ss(self.k1, self.k2, x1, x2) + q * _cc(self.k1, self.k2, x1, x2)

    def gradient(self, name: str, x1, x2):
        p, q = self.coefficients[name]
        return p * _grad_ss(self.k1, self.k2, x1, x2) + q * _grad_cc(self.k1, self.k2, x1, x2)

    def helmholtz(self, name: str, x1, x2):
        """(Δ + k²)f from the second derivatives taken term by term."""
        k1, k2 = self.k1, self.k2
        val = self.evaluate(name, x1, x2)
        return -(k1**2) * val - k2**2 * val + self.k**2 * val

    # named accessors
    def u_in(self, x1, x2):
        return self.evaluate("u_in", x1, x2)

    def u_total(self, x1, x2):
        return self.evaluate("u_total", x1, x2)

    def wD(self, x1, x2):
        return self.evaluate("wD", x1, x2)

    def wN(self, x1, x2):
        return self.evaluate("wN", x1, x2)

    def corner_spec(self) -> CornerSpec:
        """Corner data at the vertex (0, 0) of the square, with γ = ρ = a0.

        v(0) = a2 and ∇v(0) = 0; when a2 = 0 the field starts with
        k1k2 x1x2, so N0 = 2.
        """
        media = MediumModel.from_constants(self.a0, self.a0, self.k)
        if self.a2 != 0:
            d = IncidentDescriptor(True, False, 0)
        else:
            d = IncidentDescriptor(False, False, 2)
        return CornerSpec(math.pi / 4, media, d)


def rectangle_witness(k1: int = 1, k2: int = 1, a0: float = 2.0, a1: float = 1.0, a2: float = 1.0) -> NonScatteringWitness:
    """Explicit witness u_in = a1 sin sin + a2 cos cos at wavenumber √(k1²+k2²)."""
    return NonScatteringWitness(k1, k2, a0, a1, a2)


@dataclass(frozen=True)
class WitnessReport:
    residuals: dict[str, float]
    verdict: ScatterVerdict
    classify_consistent: bool
    tol: float
    n_samples: int

    @property
    def identities_hold(self) -> bool:
        return all(v <= self.tol for v in self.residuals.values())

    @property
    def passed(self) -> bool:
        return self.identities_hold and self.classify_consistent


def _boundary_samples(rng: np.random.Generator, n: int):
    """Uniform points on ∂(0, π)² with outward unit normals."""
    side = rng.integers(0, 4, n)
    s = rng.uniform(0.0, math.pi, n)
    x1 = np.where(side == 0, s, np.where(side == 1, math.pi, np.where(side == 2, s, 0.0)))
    x2 = np.where(side == 0, 0.0, np.where(side == 1, s, np.where(side == 2, math.pi, s)))
    nx = np.select([side == 1, side == 3], [1.0, -1.0], 0.0)
    ny = np.select([side == 2, side == 0], [1.0, -1.0], 0.0)
    return x1, x2, np.stack([nx, ny], axis=-1)


def witness_cross_check(witness: NonScatteringWitness, n_samples: int = 1000, seed: int = 0, tol: float = WITNESS_TOL) -> WitnessReport:
    """Sample the witness identities and check consistency with ``classify``.

    Boundary residuals are sup norms over ``n_samples`` boundary points;
    Helmholtz residuals over ``n_samples`` interior points, relative to the
    size of k²f.
    """
    rng = np.random.default_rng(seed)
    bx, by, nrm = _boundary_samples(rng, n_samples)
    ix, iy = rng.uniform(0.0, math.pi, (2, n_samples))

    def dn(name):
        return np.sum(witness.gradient(name, bx, by) * nrm, axis=-1)

    k2 = witness.k**2
    scale = max(abs(witness.a1), abs(witness.a2), 1.0)

    def helm(name):
        p, q = witness.coefficients[name]
        size = k2 * max(abs(p), abs(q), 1e-300)
        return float(np.max(np.abs(witness.helmholtz(name, ix, iy)))) / size

    res = {
        "wD_dirichlet": float(np.max(np.abs(witness.wD(bx, by)))) / scale,
        "wN_neumann": float(np.max(np.abs(dn("wN")))) / (scale * witness.k),
        "wD_helmholtz": helm("wD"),
        "wN_helmholtz": helm("wN"),
        "transmission_value": float(np.max(np.abs(witness.u_total(bx, by) - witness.u_in(bx, by)))) / scale,
        "transmission_flux": float(np.max(np.abs(witness.a0 * dn("u_total") - dn("u_in")))) / (scale * witness.k),
    }
    verdict = classify(witness.corner_spec())
    return WitnessReport(res, verdict, not verdict.always_scatters, tol, n_samples)

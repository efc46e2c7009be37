"""Periodic substrate potential built from a Lennard-Jones 12-6 pair potential.

The chain atom at horizontal offset ``xi`` (in units of the substrate period)
feels the fixed line of atoms through

    w(xi) = sum_{|j| <= J} [h((j + 1/2 + xi) / sigma) - h((j + 1/2) / sigma)],
    h(d)  = V(sqrt(d**2 + standoff**2)),

and the cost of a wall between neighbouring wells is the transition cost
``p(z) = 2 * int_0^z sqrt(w(t)) dt`` with ``p_bar = p(1)``.
"""

import json
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property

import numpy as np

from .quadrature import adaptive_simpson, gauss_legendre_unit


@dataclass(frozen=True)
class PairPotentialSpec:
    """Parameters of the pair potential and of the truncated lattice sum.

    The defaults are the frozen repository potential; they were chosen by a
    one-off search so that ``validate_potential`` passes.
    """

    well_depth: float = 1.0
    r_min: float = 1.2
    standoff: float = 1.2
    sigma: float = 1.0
    truncation_radius: int = 40
    quadrature_tol: float = 1e-9

    def __post_init__(self):
        for name in ("well_depth", "r_min", "standoff", "sigma", "quadrature_tol"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        if int(self.truncation_radius) != self.truncation_radius:
            raise ValueError("truncation_radius must be an integer")
        if self.truncation_radius < 8:
            raise ValueError("truncation_radius must be at least 8")
        tail = self.omitted_tail()
        if tail >= self.quadrature_tol:
            raise ValueError(
                f"truncation_radius={self.truncation_radius} leaves a tail of {tail:.3e}, "
                f"not below quadrature_tol={self.quadrature_tol:.3e}"
            )

    def omitted_tail(self):
        """Largest contribution to w on [-1/2, 1/2] of the first omitted terms j = +-(J+1)."""
        xi = np.linspace(-0.5, 0.5, 21)
        total = np.zeros_like(xi)
        for j in (self.truncation_radius + 1, -self.truncation_radius - 1):
            base = (j + 0.5) / self.sigma
            total += np.abs(_h(base + xi / self.sigma, self) - _h(base, self))
        return float(total.max())

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown PairPotentialSpec keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def eval_pair_potential(r, spec):
    """V(r) = well_depth * ((r_min/r)**12 - 2 (r_min/r)**6)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("pair distance must be positive")
    a6 = (spec.r_min / r) ** 6
    out = spec.well_depth * (a6 * a6 - 2.0 * a6)
    return float(out) if out.ndim == 0 else out


def _h(d, spec):
    # written in r**2 to avoid the square root
    inv = spec.r_min**2 / (d * d + spec.standoff**2)
    a6 = inv * inv * inv
    return spec.well_depth * (a6 * a6 - 2.0 * a6)


def _h1(d, spec):
    r2 = d * d + spec.standoff**2
    inv = spec.r_min**2 / r2
    a6 = inv * inv * inv
    return 12.0 * spec.well_depth * (a6 - a6 * a6) * d / r2


def _h2(d, spec):
    s2 = spec.standoff**2
    r2 = d * d + s2
    inv = spec.r_min**2 / r2
    a6 = inv * inv * inv
    a12 = a6 * a6
    vpp = spec.well_depth * (156.0 * a12 - 84.0 * a6)
    vp_r = 12.0 * spec.well_depth * (a6 - a12)
    return (vpp * d * d + vp_r * s2) / (r2 * r2)


def eval_h(d, spec):
    """Standoff-composed pair interaction h(d) = V(sqrt(d**2 + standoff**2))."""
    out = _h(np.asarray(d, dtype=float), spec)
    return float(out) if np.ndim(out) == 0 else out


_H_DERIVS = (_h, _h1, _h2)
_BROADCAST_LIMIT = 2_000_000


@dataclass(frozen=True)
class WeakPotential:
    """The period-1 weak interaction potential for a given pair spec.

    The lattice sum is truncated symmetrically about the well nearest to the
    evaluation point, i.e. over |j + round(xi)| <= J. This keeps w exactly
    periodic and exactly zero at the integers; the only truncation effect is
    a jump of order h(J / sigma) at the half-integers.
    """

    spec: PairPotentialSpec = field(default_factory=PairPotentialSpec)

    @cached_property
    def _offsets(self):
        j = np.arange(-self.spec.truncation_radius, self.spec.truncation_radius + 1)
        return (j + 0.5) / self.spec.sigma

    @cached_property
    def _baseline(self):
        return _h(self._offsets, self.spec)

    def w(self, xi, order=0):
        """Truncated lattice sum (order 0) or its analytic derivatives in xi."""
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        xi = np.asarray(xi, dtype=float)
        scalar = xi.ndim == 0
        x = np.atleast_1d(xi)
        shape = x.shape
        # centre the truncated window on the nearest well: exact period 1
        x = x.ravel()
        x = (x - np.floor(x + 0.5)) / self.spec.sigma
        deriv = _H_DERIVS[order]
        offs = self._offsets
        if x.size * offs.size <= _BROADCAST_LIMIT:
            vals = deriv(offs[None, :] + x[:, None], self.spec)
            if order == 0:
                vals = vals - self._baseline[None, :]
            out = vals.sum(axis=1)
        else:
            out = np.zeros_like(x)
            for k, off in enumerate(offs):
                term = deriv(off + x, self.spec)
                if order == 0:
                    term -= self._baseline[k]
                out += term
        if order:
            out = out / self.spec.sigma**order
        out = out.reshape(shape)
        return float(out[0]) if scalar else out

    def sqrt_w(self, xi):
        return np.sqrt(np.maximum(self.w(xi), 0.0))

    @cached_property
    def curvature_at_well(self):
        return self.w(0.0, order=2)

    @cached_property
    def p_bar(self):
        return transition_cost(1.0, self)

    @cached_property
    def _p_table(self):
        # cumulative p on a uniform grid of [0, 1], 12-point Gauss-Legendre per cell
        n = 1024
        edges = np.linspace(0.0, 1.0, n + 1)
        t, wt = gauss_legendre_unit(12)
        x = edges[:-1, None] + (1.0 / n) * t[None, :]
        cell = (2.0 / n) * (self.sqrt_w(x.ravel()).reshape(x.shape) @ wt)
        return edges, np.concatenate([[0.0], np.cumsum(cell)])

    def transition_cost_array(self, z):
        """Vectorized p(z) from a precomputed cumulative table.

        Agrees with the adaptive ``transition_cost`` to far below
        ``quadrature_tol``; the period-1 identity p(z + 1) - p(z) = p(1)
        holds exactly by construction.
        """
        z = np.asarray(z, dtype=float)
        edges, cum = self._p_table
        n = edges.size - 1
        period = cum[-1]
        whole = np.floor(z)
        frac = z - whole
        k = np.minimum((frac * n).astype(int), n - 1)
        left = edges[k]
        t, wt = gauss_legendre_unit(12)
        span = frac - left
        pts = left[..., None] + span[..., None] * t
        partial = 2.0 * span * (self.sqrt_w(pts.reshape(-1)).reshape(pts.shape) @ wt)
        out = whole * period + cum[k] + partial
        return float(out) if out.ndim == 0 else out


def eval_w(xi, order, pot):
    return pot.w(xi, order)


def transition_cost(z, pot):
    """p(z) = 2 * int_0^z sqrt(w(t)) dt by adaptive Simpson quadrature.

    Whole periods are folded out first, so p(z + 1) - p(z) is exactly p(1)
    up to the quadrature error of a single period.
    """
    z = float(z)
    tol = pot.spec.quadrature_tol
    if z < 0:
        # w is even, so p is odd
        return -transition_cost(-z, pot)
    whole = np.floor(z)
    frac = z - whole

    def integrand(t):
        return 2.0 * pot.sqrt_w(t)

    period = adaptive_simpson(integrand, 0.0, 1.0, tol=tol * 1e-2) if whole else 0.0
    part = adaptive_simpson(integrand, 0.0, frac, tol=tol * 1e-2) if frac else 0.0
    return float(whole * period + part)


def i_alpha(pot, alpha):
    """p(1 - alpha) - p(alpha): the transition budget between the alpha-levels."""
    return transition_cost(1.0 - alpha, pot) - transition_cost(alpha, pot)


@dataclass(frozen=True)
class ValidationReport:
    integer_defect: float
    min_w_off_integers: float
    curvature_at_well: float
    periodicity_defect: float
    symmetry_defect: float
    tolerance: float
    passed: bool
    diagnostics: tuple = ()

    def to_dict(self):
        out = asdict(self)
        out["diagnostics"] = list(self.diagnostics)
        return out


def validate_potential(pot, n_samples=10_000):
    """Check the structural assumptions on w by dense sampling.

    Failures are reported in the returned report, never raised.
    """
    tol = 10.0 * pot.spec.quadrature_tol
    xi = np.linspace(-0.5, 1.5, n_samples)
    w = pot.w(xi)
    w_shift = pot.w(xi + 1.0)
    w_mirror = pot.w(1.0 - xi)
    integer_defect = float(np.max(np.abs(pot.w(np.array([-1.0, 0.0, 1.0, 2.0])))))
    away = np.abs(xi - np.round(xi)) >= 1e-3
    min_w = float(w[away].min())
    curvature = float(pot.curvature_at_well)
    periodicity = float(np.max(np.abs(w_shift - w)))
    symmetry = float(np.max(np.abs(w_mirror - w)))

    diagnostics = []
    if integer_defect > tol:
        diagnostics.append(f"w does not vanish at integers (defect {integer_defect:.3e})")
    # "positive" means resolvable above truncation noise
    if min_w <= tol:
        diagnostics.append(f"w is not positive off the integers (min {min_w:.3e})")
    if curvature <= tol:
        diagnostics.append(f"degenerate well: w''(0) = {curvature:.3e}")
    if periodicity > tol:
        diagnostics.append(f"periodicity defect {periodicity:.3e}")
    if symmetry > tol:
        diagnostics.append(f"symmetry defect {symmetry:.3e}")
    return ValidationReport(
        integer_defect=integer_defect,
        min_w_off_integers=min_w,
        curvature_at_well=curvature,
        periodicity_defect=periodicity,
        symmetry_defect=symmetry,
        tolerance=tol,
        passed=not diagnostics,
        diagnostics=tuple(diagnostics),
    )


DEFAULT_SPEC = PairPotentialSpec()


def default_potential():
    return WeakPotential(DEFAULT_SPEC)

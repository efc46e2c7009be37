"""Heteroclinic domain-wall profile and recovery sequences for step functions.

The profile solves xi' = sqrt(w(xi)), xi(0) = 1/2. It is tabulated by
inverting x(xi) = int_{1/2}^{xi} dt / sqrt(w(t)) on a graded xi-grid that
stops at distance ``eta`` from the wells; beyond the table the profile
continues with its linearised well tail 1 - eta * exp(-kappa (x - x_eta)),
kappa = sqrt(w''(0) / 2).
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.special import expit

from .functions import PiecewiseAffine, StepFunction, UniformPartition
from .quadrature import gauss_legendre_unit

INCREASING = "increasing"
DECREASING = "decreasing"
DEFAULT_ETA = 1e-4


class PotentialDegeneracyError(ArithmeticError):
    """w vanishes (or goes negative) away from the integers."""


class ConstructionError(ValueError):
    """A recovery sequence cannot be built at the requested resolution."""


@dataclass(frozen=True, eq=False)
class HeteroclinicProfile:
    eta: float
    direction: str
    kappa: float
    x: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)
    slope: np.ndarray = field(repr=False)

    @property
    def x_end(self):
        return float(self.x[-1])

    @property
    def _spline(self):
        spline = self.__dict__.get("_cached_spline")
        if spline is None:
            spline = CubicHermiteSpline(self.x, self.xi, self.slope)
            self.__dict__["_cached_spline"] = spline
        return spline

    def _increasing(self, x, nu=0):
        # evaluated on |x| and reflected, so xi(x) + xi(-x) = 1 holds exactly
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        inside = ax <= self.x_end
        out = np.empty_like(ax)
        tail = self.eta * np.exp(-self.kappa * (ax[~inside] - self.x_end))
        if nu == 0:
            out[inside] = self._spline(ax[inside])
            out[~inside] = 1.0 - tail
            return np.where(x < 0, 1.0 - out, out)
        out[inside] = self._spline(ax[inside], 1)
        out[~inside] = self.kappa * tail
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self._increasing(-x if self.direction == DECREASING else x)
        return float(out) if out.ndim == 0 else out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.direction == DECREASING:
            out = -self._increasing(-x, nu=1)
        else:
            out = self._increasing(x, nu=1)
        return float(out) if out.ndim == 0 else out

    def distance_to_well(self, x):
        """1 - xi(x) for x >= 0 (increasing orientation), without cancellation."""
        ax = np.abs(np.asarray(x, dtype=float))
        inside = ax <= self.x_end
        out = np.empty_like(ax)
        out[inside] = 1.0 - self._spline(ax[inside])
        out[~inside] = self.eta * np.exp(-self.kappa * (ax[~inside] - self.x_end))
        return out

    def tangent_ratio(self, x):
        """(1 - xi(x)) / xi'(x) for x > 0; equals 1/kappa in the exponential tail."""
        x = float(x)
        if x > self.x_end:
            return 1.0 / self.kappa
        return float(self.distance_to_well(x)) / float(self._spline(x, 1))

    def samples(self):
        """Full table (x, xi) in this profile's orientation, x increasing."""
        x = np.concatenate([-self.x[:0:-1], self.x])
        return x, self(x)


def heteroclinic_profile(pot, eta=DEFAULT_ETA, direction=INCREASING, n_half=4000):
    """Tabulate the heteroclinic connection between the wells 0 and 1."""
    if not 0 < eta < 0.4:
        raise ValueError("eta must lie in (0, 0.4)")
    if direction not in (INCREASING, DECREASING):
        raise ValueError(f"unknown direction {direction!r}")
    return _profile(pot, float(eta), direction, int(n_half))


@lru_cache(maxsize=32)
def _profile(pot, eta, direction, n_half):
    kappa2 = pot.curvature_at_well / 2.0
    if not kappa2 > 0:
        raise PotentialDegeneracyError("w''(0) must be positive")
    # xi = expit(2 s): uniform s gives nearly uniform x near the wells
    s_max = 0.5 * math.log((1.0 - eta) / eta)
    s = np.linspace(0.0, s_max, n_half + 1)
    u = expit(-2.0 * s)  # distance 1 - xi, computed without cancellation
    u[0] = 0.5
    # w is even about 1/2, so w(1 - u) is evaluated as w(u) near the accurate well at 0
    t, wt = gauss_legendre_unit(10)
    du = u[:-1] - u[1:]
    pts = u[1:, None] + du[:, None] * t[None, :]
    wv = pot.w(pts.ravel()).reshape(pts.shape)
    if np.any(wv <= 0):
        raise PotentialDegeneracyError("w vanishes before the profile reaches 1 - eta")
    seg = du * ((1.0 / np.sqrt(wv)) @ wt)
    x = np.concatenate([[0.0], np.cumsum(seg)])
    w_nodes = pot.w(u)
    if np.any(w_nodes <= 0):
        raise PotentialDegeneracyError("w vanishes before the profile reaches 1 - eta")
    slope = np.sqrt(w_nodes)
    xi = 1.0 - u
    xi[0] = 0.5
    for arr in (x, xi, slope):
        arr.setflags(write=False)
    return HeteroclinicProfile(
        eta=eta, direction=direction, kappa=math.sqrt(kappa2), x=x, xi=xi, slope=slope
    )


@dataclass(frozen=True)
class EquipartitionReport:
    dirichlet: float
    weak: float
    p_bar: float
    tail_correction: float

    @property
    def imbalance(self):
        return abs(self.dirichlet - self.weak)


def equipartition(profile, pot, order=8):
    """Integrals of xi'^2 and w(xi) over the tabulated range, in x.

    The tail correction is what the linearised tails beyond the table add
    to each integral: kappa * eta**2 / 2 per side.
    """
    x = profile.x
    t, wt = gauss_legendre_unit(order)
    h = np.diff(x)
    pts = x[:-1, None] + h[:, None] * t[None, :]
    flat = pts.ravel()
    d = profile._spline(flat, 1)
    xi = profile._spline(flat)
    u = 1.0 - xi
    kin = np.sum(h * ((d * d).reshape(pts.shape) @ wt))
    pot_half = np.sum(h * (pot.w(u).reshape(pts.shape) @ wt))
    tail = profile.kappa * profile.eta**2
    # both halves by oddness
    return EquipartitionReport(
        dirichlet=2.0 * float(kin),
        weak=2.0 * float(pot_half),
        p_bar=pot.p_bar,
        tail_correction=float(tail),
    )


@dataclass(frozen=True, eq=False)
class RecoveryBuild:
    epsilon: float
    delta: float
    beta: float
    tangent_point: float
    x0: float
    levels: tuple
    result: PiecewiseAffine = field(repr=False)

    def metadata(self):
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "beta": self.beta,
            "tangent_point": self.tangent_point,
            "x0": self.x0,
            "levels": list(self.levels),
        }


def _tangent_geometry(profile, epsilon, eta_limit=1e-3):
    """Tangent point sqrt(eps) and crossing abscissa beta of the scaled profile."""
    tangent = math.sqrt(epsilon)
    X = 1.0 / tangent
    if X > profile.x_end and profile.eta > eta_limit:
        raise ConstructionError(
            f"tangent point x={X:.3g} lies beyond the tabulated profile "
            f"(x_end={profile.x_end:.3g}); reduce eta below {eta_limit}"
        )
    beta = tangent + epsilon * profile.tangent_ratio(X)
    gap = float(profile.distance_to_well(X))  # 1 - xi(X)
    return tangent, beta, gap


def _unit_hat(profile, epsilon, tangent, beta, gap, y):
    """The five-branch increasing unit step centred at 0, evaluated at y."""
    y = np.asarray(y, dtype=float)
    ay = np.abs(y)
    up = np.ones_like(ay)
    inner = ay <= tangent
    up[inner] = 1.0 - profile.distance_to_well(ay[inner] / epsilon)
    line = (ay > tangent) & (ay < beta)
    up[line] = 1.0 - gap * (beta - ay[line]) / (beta - tangent)
    return np.where(y < 0, 1.0 - up, up)


def _recovery_profile(pot):
    return heteroclinic_profile(pot, DEFAULT_ETA, INCREASING)


def _copies(epsilon, delta, beta, count):
    rho = epsilon * delta
    # smallest grid multiple strictly above 2 beta + rho
    T = int(math.floor((2.0 * beta + rho) / rho + 1e-9)) + 1
    return T * rho


def _assemble(pot, epsilon, delta, jumps, profile=None):
    """Sum of translated unit steps.

    `jumps` is a list of (grid index of first copy centre, signed jump K).
    Returns the function, beta, tangent point, and the per-copy separation.
    """
    profile = profile or _recovery_profile(pot)
    rho = epsilon * delta
    tangent, beta, gap = _tangent_geometry(profile, epsilon)
    if 2.0 * beta / rho < 8:
        raise ConstructionError(
            f"grid spacing {rho:.3g} leaves fewer than 8 cells across the wall "
            f"(beta={beta:.3g})"
        )
    sep = _copies(epsilon, delta, beta, 1)
    sep_cells = int(round(sep / rho))
    reach = int(math.ceil(beta / rho)) + 1
    lo = min(c for c, _ in jumps) - reach
    hi = max(c + (abs(K) - 1) * sep_cells for c, K in jumps) + reach
    part = UniformPartition(rho, lo, hi)
    idx = part.indices
    values = np.zeros(idx.size)
    for centre, K in jumps:
        sign = 1.0 if K > 0 else -1.0
        for k in range(abs(K)):
            c = centre + k * sep_cells
            window = slice(max(c - reach - lo, 0), min(c + reach - lo + 1, idx.size))
            y = (idx[window] - c) * rho
            values[window] += sign * _unit_hat(profile, epsilon, tangent, beta, gap, y)
            values[c + reach - lo + 1:] += sign
    return PiecewiseAffine(part, values), beta, tangent, sep


def _snap(x0, rho):
    return int(round(x0 / rho))


def recovery_step(pot, epsilon, delta, x0=0.0, direction=INCREASING, levels=None):
    """Unit-step recovery function sampled on the grid of spacing epsilon * delta.

    `levels` = (left, right) integer levels differing by one; the default is
    (0, 1) for an increasing step and (1, 0) for a decreasing one.
    """
    if levels is None:
        levels = (0, 1) if direction == INCREASING else (1, 0)
    left, right = int(levels[0]), int(levels[1])
    if abs(right - left) != 1:
        raise ValueError("a unit step joins levels that differ by one")
    if (right > left) != (direction == INCREASING):
        raise ValueError(f"levels {levels} are inconsistent with direction {direction!r}")
    rho = epsilon * delta
    centre = _snap(x0, rho)
    g, beta, tangent, _ = _assemble(pot, epsilon, delta, [(centre, right - left)])
    g = PiecewiseAffine(g.partition, g.node_values + left)
    return RecoveryBuild(
        epsilon=epsilon,
        delta=delta,
        beta=beta,
        tangent_point=tangent,
        x0=centre * rho,
        levels=(left, right),
        result=g,
    )


def multijump_separation(pot, epsilon, delta):
    """Grid-aligned distance between consecutive unit-step copies."""
    tangent, beta, _ = _tangent_geometry(_recovery_profile(pot), epsilon)
    return _copies(epsilon, delta, beta, 1)


def recovery_multijump(pot, epsilon, delta, x0, jump, base_level=0):
    """Jump of integer size `jump` built from |jump| separated unit steps at x0, x0 + t, ..."""
    if jump == 0 or int(jump) != jump:
        raise ValueError("jump must be a nonzero integer")
    rho = epsilon * delta
    g, *_ = _assemble(pot, epsilon, delta, [(_snap(x0, rho), int(jump))])
    return PiecewiseAffine(g.partition, g.node_values + base_level)


def jump_support(pot, epsilon, delta, centre, jump):
    """Interval outside which a jump's recovery is constant."""
    rho = epsilon * delta
    tangent, beta, _ = _tangent_geometry(_recovery_profile(pot), epsilon)
    sep = _copies(epsilon, delta, beta, 1)
    first = _snap(centre, rho) * rho
    return first - beta, first + (abs(jump) - 1) * sep + beta


def recovery_bv(pot, epsilon, delta, target):
    """Recovery function for an integer-valued step function.

    Each jump K_j at t_j becomes |K_j| separated unit steps starting at t_j;
    the pieces are spliced with exact integer plateaus between them.
    """
    if not isinstance(target, StepFunction):
        raise TypeError("target must be a StepFunction")
    rho = epsilon * delta
    if not target.breakpoints:
        part = UniformPartition(rho, -1, 1)
        return PiecewiseAffine(part, np.full(3, float(target.levels[0])))
    jumps = list(zip(target.breakpoints, target.jumps))
    supports = [jump_support(pot, epsilon, delta, t, K) for t, K in jumps]
    for j in range(len(supports) - 1):
        if supports[j][1] + rho >= supports[j + 1][0]:
            raise ConstructionError(
                f"breakpoints {target.breakpoints[j]} and {target.breakpoints[j + 1]} "
                f"are too close for epsilon={epsilon}, delta={delta}"
            )
    g, *_ = _assemble(pot, epsilon, delta, [(_snap(t, rho), K) for t, K in jumps])
    return PiecewiseAffine(g.partition, g.node_values + target.levels[0])

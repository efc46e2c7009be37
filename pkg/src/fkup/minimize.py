"""Descent minimization of the discrete chain energies and translation normalization."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky_banded, cho_solve_banded

from .energies import (
    MesoscaleParams,
    ReferenceProfile,
    TwoScaleParams,
    _discrete,
)
from .functions import ChainState, PiecewiseAffine

ARMIJO = 1e-4


@dataclass(frozen=True)
class MinimizeConfig:
    grad_tol: float = 1e-7
    max_iters: int = 5000
    step_rule: str = "backtracking"
    init: str = "reference_profile"
    preconditioner: str = "elastic"
    fixed_step: float = 1.0
    initial_values: tuple = None
    record_trace: bool = False

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.step_rule not in ("fixed", "backtracking"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if self.init not in ("reference_profile", "linear_ramp", "provided"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.preconditioner not in ("none", "elastic"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if self.init == "provided" and self.initial_values is None:
            raise ValueError("init='provided' needs initial_values")


@dataclass(frozen=True)
class NormalizationConfig:
    alpha: float = 0.1

    def __post_init__(self):
        if not 0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 1/2)")


@dataclass(frozen=True, eq=False)
class MinimizeResult:
    kind: str
    params: object
    chain: ChainState = field(repr=False)
    energy: float
    converged: bool
    iterations: int
    grad_norm: float
    wall_count: int
    trace: list = field(default_factory=list, repr=False)

    def diagnostics(self):
        return {
            "kind": self.kind,
            "params": self.params.to_dict(),
            "iterations": self.iterations,
            "converged": self.converged,
            "energy": self.energy,
            "wall_count": self.wall_count,
            "grad_norm": self.grad_norm,
        }


def wall_count(c):
    """Crossings of half-integer levels along the chain."""
    v = c.values if isinstance(c, ChainState) else np.asarray(c, dtype=float)
    a, b = v[:-1], v[1:]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    # number of k + 1/2 in [lo, hi)
    return int(np.sum(np.floor(hi - 0.5) - np.floor(lo - 0.5)))


def _params_for(kind, params):
    if kind == "meso" and isinstance(params, MesoscaleParams):
        return params
    if kind == "twoscale" and isinstance(params, TwoScaleParams):
        return params
    raise ValueError(f"parameters {params!r} do not match energy kind {kind!r}")


def wall_positions(boundary, bounds):
    """Evenly spaced wall centres inside the window, one per unit of jump."""
    n = abs(boundary.jump)
    a, b = bounds
    return [a + (k + 1) * (b - a) / (n + 1) for k in range(n)]


def initial_values(boundary, nodes, width, how="reference_profile"):
    """Starting chain: separated tanh walls of the given width, or a linear ramp."""
    a, b = nodes[0], nodes[-1]
    if how == "linear_ramp":
        v = boundary.m_left + boundary.jump * (nodes - a) / (b - a)
    else:
        sign = 1.0 if boundary.jump > 0 else -1.0
        if abs(boundary.jump) == 1:
            centres = [0.5 * (a + b)]
        else:
            centres = wall_positions(boundary, (a, b))
        v = np.full(nodes.shape, float(boundary.m_left))
        for c in centres:
            v += sign * 0.5 * (np.tanh((nodes - c) / width) + 1.0)
    v = np.array(v, dtype=float)
    v[0], v[-1] = boundary.m_left, boundary.m_right
    return v


def _preconditioner(params, pot, n):
    # elastic Hessian plus the well curvature on the interior nodes, banded Cholesky
    m = n - 2
    diag = np.full(m, 4.0 * params.elastic_coeff + params.weak_weight * pot.curvature_at_well)
    off = np.full(m, -2.0 * params.elastic_coeff)
    off[0] = 0.0
    ab = np.vstack([off, diag])
    return cholesky_banded(ab, lower=False)


def minimize_energy(kind, params, pot, boundary, window, cfg=MinimizeConfig()):
    """Minimize the discrete energy with clamped ends at the boundary levels.

    Preconditioned gradient descent with Armijo backtracking (step halving).
    Non-convergence within max_iters is reported through ``converged``.
    """
    params = _params_for(kind, params)
    if not math.isclose(window.spacing, params.spacing, rel_tol=1e-12):
        raise ValueError("window spacing does not match the energy parameters")
    nodes = window.nodes
    if cfg.init == "provided":
        v = np.array(cfg.initial_values, dtype=float)
        if v.shape != nodes.shape:
            raise ValueError("initial_values length does not match the window")
        v[0], v[-1] = boundary.m_left, boundary.m_right
    else:
        width = 1.0 if kind == "meso" else params.epsilon
        v = initial_values(boundary, nodes, width, cfg.init)

    chol = _preconditioner(params, pot, v.size) if cfg.preconditioner == "elastic" else None

    def energy(x):
        return _discrete(x, pot, params)

    def gradient(x):
        g = np.zeros_like(x)
        lap = x[2:] - 2.0 * x[1:-1] + x[:-2]
        g[1:-1] = -2.0 * params.elastic_coeff * lap + params.weak_weight * pot.w(x[1:-1], 1)
        return g

    E = energy(v)
    g = gradient(v)
    gnorm = float(np.max(np.abs(g)))
    trace = [(0, E, gnorm)] if cfg.record_trace else []
    converged = gnorm <= cfg.grad_tol
    it = 0
    step = cfg.fixed_step
    while not converged and it < cfg.max_iters:
        it += 1
        d = np.zeros_like(v)
        if chol is not None:
            d[1:-1] = -cho_solve_banded((chol, False), g[1:-1])
        else:
            d[1:-1] = -g[1:-1]
        slope = float(g @ d)
        if cfg.step_rule == "fixed":
            v_new = v + cfg.fixed_step * d
            E_new = energy(v_new)
        else:
            step = min(1.0, 2.0 * step)
            while True:
                v_new = v + step * d
                E_new = energy(v_new)
                if E_new <= E + ARMIJO * step * slope:
                    break
                step *= 0.5
                if step < 1e-14:
                    break
            if step < 1e-14:
                # no decrease resolvable above rounding: stop here
                break
        if not np.isfinite(E_new):
            raise FloatingPointError("energy became non-finite during descent")
        v, E = v_new, E_new
        g = gradient(v)
        gnorm = float(np.max(np.abs(g)))
        if cfg.record_trace:
            trace.append((it, E, gnorm))
        converged = gnorm <= cfg.grad_tol

    chain = ChainState(window.spacing, v, window.i_min)
    return MinimizeResult(
        kind=kind,
        params=params,
        chain=chain,
        energy=float(E),
        converged=bool(converged),
        iterations=it,
        grad_norm=gnorm,
        wall_count=wall_count(chain),
        trace=trace,
    )


def half_crossing(g, level=0.5):
    """Leftmost x where the piecewise-affine g crosses `level`."""
    v = g.node_values - level
    x = g.nodes
    idx = np.nonzero((v[:-1] < 0) & (v[1:] >= 0) | (v[:-1] > 0) & (v[1:] <= 0))[0]
    if idx.size == 0:
        raise ValueError(f"function never crosses {level}")
    i = idx[0]
    return float(x[i] + (x[i + 1] - x[i]) * v[i] / (v[i] - v[i + 1]))


def _sublevel_intervals(g, centre, alpha):
    """Maximal intervals of the window where |g - centre| < alpha."""
    x = g.nodes
    v = g.node_values - centre
    pieces = []
    for k in range(x.size - 1):
        v0, v1 = v[k], v[k + 1]
        if abs(v0) < alpha and abs(v1) < alpha:
            pieces.append((x[k], x[k + 1]))
            continue
        if v0 == v1:
            continue
        # |v0 + (v1 - v0) s| < alpha for s in (s_lo, s_hi)
        s_a = (-alpha - v0) / (v1 - v0)
        s_b = (alpha - v0) / (v1 - v0)
        s_lo, s_hi = max(min(s_a, s_b), 0.0), min(max(s_a, s_b), 1.0)
        if s_hi > s_lo:
            h = x[k + 1] - x[k]
            pieces.append((x[k] + s_lo * h, x[k] + s_hi * h))
    merged = []
    for a, b in pieces:
        if merged and a <= merged[-1][1] + 1e-15:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return np.array(merged).reshape(-1, 2)


def translation_normalize(g, vbar=ReferenceProfile(), ncfg=NormalizationConfig(), delta=None):
    """Grid shift a that best aligns g's alpha-level sets with those of vbar.

    For each a in delta*Z the measure |V_a^0| + |V_a^1| is computed exactly,
    with V_a^0 = {|g(x+a)| < alpha, |1 - vbar(x)| < alpha} and
    V_a^1 = {|1 - g(x+a)| < alpha, |vbar(x)| < alpha}. Among the minimizing
    shifts the middle one is returned (lower middle on ties), which makes the
    result equivariant under grid translations of g.

    Returns (shift, normalized, measure) with normalized(x) = g(x + shift).
    """
    if g.left_tail != 0.0 or g.right_tail != 1.0:
        raise ValueError("translation normalization needs tails 0 (left) and 1 (right)")
    if vbar.boundary.m_left != 0 or vbar.boundary.m_right != 1:
        raise ValueError("reference profile must connect 0 and 1")
    rho = g.partition.spacing
    if delta is not None and not math.isclose(delta, rho, rel_tol=1e-12):
        raise ValueError("delta does not match the spacing of g")
    alpha = ncfg.alpha
    # vbar > 1 - alpha  <=>  x > x_plus;  vbar < alpha  <=>  x < -x_plus
    x_plus = math.atanh(1.0 - 2.0 * alpha)
    near0 = _sublevel_intervals(g, 0.0, alpha)
    near1 = _sublevel_intervals(g, 1.0, alpha)
    reach = int(math.ceil(x_plus / rho)) + 1
    ks = np.arange(g.partition.i_min - reach, g.partition.i_max + reach + 1)
    a = ks * rho
    # |V_a^0| = |{y > x_plus + a : |g(y)| < alpha}|
    m0 = np.zeros(a.size)
    for lo, hi in near0:
        m0 += np.clip(hi - np.maximum(lo, x_plus + a), 0.0, None)
    # |V_a^1| = |{y < a - x_plus : |1 - g(y)| < alpha}|
    m1 = np.zeros(a.size)
    for lo, hi in near1:
        m1 += np.clip(np.minimum(hi, a - x_plus) - lo, 0.0, None)
    measure = m0 + m1
    best = measure.min()
    winners = np.nonzero(measure <= best + 1e-12)[0]
    k = int(ks[winners[(winners.size - 1) // 2]])
    normalized = g.shifted(k)
    return k * rho, normalized, float(best)

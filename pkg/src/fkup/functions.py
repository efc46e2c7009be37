"""Truncated function spaces on uniform partitions.

Functions on the real line are represented on a finite window of a uniform
partition ``{i * spacing}``; outside the window they are constant (the
tails). Step functions carry integer levels only.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class UniformPartition:
    spacing: float
    i_min: int
    i_max: int

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if self.i_max - self.i_min < 2:
            raise ValueError("a partition window needs at least two cells")

    @classmethod
    def symmetric(cls, spacing, halfwidth):
        """Smallest window [-n*spacing, n*spacing] covering [-halfwidth, halfwidth]."""
        n = max(int(math.ceil(halfwidth / spacing - 1e-9)), 1)
        return cls(spacing, -n, n)

    @classmethod
    def covering(cls, spacing, a, b):
        i_min = int(math.floor(a / spacing + 1e-9))
        i_max = int(math.ceil(b / spacing - 1e-9))
        if i_max - i_min < 2:
            i_max = i_min + 2
        return cls(spacing, i_min, i_max)

    @property
    def size(self):
        return self.i_max - self.i_min + 1

    @property
    def indices(self):
        return np.arange(self.i_min, self.i_max + 1)

    @property
    def nodes(self):
        return self.indices * self.spacing

    @property
    def bounds(self):
        return self.i_min * self.spacing, self.i_max * self.spacing

    def shifted(self, k):
        """The same window moved by k cells."""
        return UniformPartition(self.spacing, self.i_min + k, self.i_max + k)

    def to_dict(self):
        return {"spacing": self.spacing, "i_min": self.i_min, "i_max": self.i_max}


@dataclass(frozen=True, eq=False)
class PiecewiseAffine:
    """Continuous function, affine on each cell, constant outside the window."""

    partition: UniformPartition
    node_values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.node_values, dtype=float)
        if vals.shape != (self.partition.size,):
            raise ValueError(
                f"expected {self.partition.size} node values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("node values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "node_values", vals)

    @property
    def left_tail(self):
        return float(self.node_values[0])

    @property
    def right_tail(self):
        return float(self.node_values[-1])

    @property
    def nodes(self):
        return self.partition.nodes

    @property
    def spacing(self):
        return self.partition.spacing

    def __call__(self, x):
        return eval_pa(self, x)

    def slopes(self):
        return np.diff(self.node_values) / self.partition.spacing

    def shifted(self, k):
        """x -> g(x + k * spacing); the node values move to a window k cells lower."""
        return PiecewiseAffine(self.partition.shifted(-k), self.node_values)

    def dilated(self, factor):
        """x -> g(x / factor), living on spacing factor * spacing."""
        p = self.partition
        return PiecewiseAffine(
            UniformPartition(p.spacing * factor, p.i_min, p.i_max), self.node_values
        )

    def to_dict(self):
        return {
            "partition": self.partition.to_dict(),
            "node_values": self.node_values.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(UniformPartition(**data["partition"]), np.asarray(data["node_values"]))


@dataclass(frozen=True)
class StepFunction:
    """Integer-valued step function; levels[j] holds on (t_{j}, t_{j+1})."""

    breakpoints: tuple
    levels: tuple

    def __post_init__(self):
        bps = tuple(float(t) for t in self.breakpoints)
        levels = tuple(self.levels)
        if any(int(z) != z for z in levels):
            raise ValueError("step levels must be integers")
        levels = tuple(int(z) for z in levels)
        if len(levels) != len(bps) + 1:
            raise ValueError("need exactly one more level than breakpoints")
        if any(b <= a for a, b in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(a == b for a, b in zip(levels, levels[1:])):
            raise ValueError("consecutive levels must differ")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "levels", levels)

    @classmethod
    def unit_step(cls, at=0.0):
        return cls((at,), (0, 1))

    @property
    def jumps(self):
        return [b - a for a, b in zip(self.levels, self.levels[1:])]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(np.asarray(self.breakpoints), x, side="right")
        out = np.asarray(self.levels)[idx]
        return int(out) if out.ndim == 0 else out

    def to_dict(self):
        return {"breakpoints": list(self.breakpoints), "levels": list(self.levels)}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(data["breakpoints"]), tuple(data["levels"]))


@dataclass(frozen=True, eq=False)
class ChainState:
    """Discrete displacements xi_i, i in [i_min, i_max], on node spacing delta_eff.

    The first and last entries are the clamped boundary values.
    """

    delta_eff: float
    values: np.ndarray = field(repr=False)
    i_min: int = 0

    def __post_init__(self):
        if not self.delta_eff > 0:
            raise ValueError("delta_eff must be positive")
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 3:
            raise ValueError("a chain needs at least three nodes")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def left_clamp(self):
        return float(self.values[0])

    @property
    def right_clamp(self):
        return float(self.values[-1])

    @property
    def partition(self):
        return UniformPartition(self.delta_eff, self.i_min, self.i_min + self.values.size - 1)

    def lift(self):
        """The piecewise-affine function through the chain values."""
        return PiecewiseAffine(self.partition, self.values)

    @classmethod
    def from_function(cls, g):
        return cls(g.partition.spacing, g.node_values, g.partition.i_min)


def interpolate(f, partition, tails=None, atol=1e-8):
    """Nodal interpolant of a vectorized callable on `partition`.

    `tails` are the constant values taken outside the window; they must
    agree with f at the window edges.
    """
    values = np.asarray(f(partition.nodes), dtype=float)
    if tails is not None:
        lo, hi = tails
        if abs(values[0] - lo) > atol or abs(values[-1] - hi) > atol:
            raise ValueError(
                f"tails {tails} do not match f at the window edges "
                f"({values[0]!r}, {values[-1]!r})"
            )
        values[0], values[-1] = lo, hi
    return PiecewiseAffine(partition, values)


def eval_pa(g, x):
    x = np.asarray(x, dtype=float)
    out = np.interp(x, g.partition.nodes, g.node_values)
    return float(out) if out.ndim == 0 else out


def dirichlet_energy(g):
    """Exact integral of g'(x)**2."""
    dv = np.diff(g.node_values)
    return float(np.sum(dv * dv) / g.partition.spacing)


def _merged_cells(g1, g2, a=None, b=None):
    lo = min(g1.nodes[0], g2.nodes[0]) if a is None else a
    hi = max(g1.nodes[-1], g2.nodes[-1]) if b is None else b
    pts = np.union1d(g1.nodes, g2.nodes)
    pts = pts[(pts > lo) & (pts < hi)]
    return np.concatenate([[lo], pts, [hi]])


def l2_distance(g1, g2):
    """Exact L2 distance of two piecewise-affine functions with equal tails."""
    if g1.left_tail != g2.left_tail or g1.right_tail != g2.right_tail:
        raise ValueError("functions with different tails are at infinite L2 distance")
    x = _merged_cells(g1, g2)
    d = eval_pa(g1, x) - eval_pa(g2, x)
    h = np.diff(x)
    d0, d1 = d[:-1], d[1:]
    return float(math.sqrt(max(np.sum(h * (d0 * d0 + d0 * d1 + d1 * d1)) / 3.0, 0.0)))


def _abs_affine_integral(h, d0, d1):
    """Integral of |affine| over cells given end values."""
    same = d0 * d1 >= 0
    a0, a1 = np.abs(d0), np.abs(d1)
    denom = np.where(same, 1.0, a0 + a1)
    return np.where(same, 0.5 * h * (a0 + a1), 0.5 * h * (d0 * d0 + d1 * d1) / denom)


def l1_distance_window(g1, g2, a, b):
    """Exact L1 distance on [a, b]; g2 may be a PiecewiseAffine or a StepFunction."""
    if b <= a:
        raise ValueError("empty window")
    if isinstance(g2, StepFunction):
        return _l1_to_step(g1, g2, a, b)
    x = _merged_cells(g1, g2, a, b)
    d = eval_pa(g1, x) - eval_pa(g2, x)
    return float(np.sum(_abs_affine_integral(np.diff(x), d[:-1], d[1:])))


def _l1_to_step(g, s, a, b):
    pts = np.union1d(g.nodes, np.asarray(s.breakpoints, dtype=float))
    pts = pts[(pts > a) & (pts < b)]
    x = np.concatenate([[a], pts, [b]])
    mids = 0.5 * (x[:-1] + x[1:])
    level = np.asarray(s(mids), dtype=float)
    gx = eval_pa(g, x)
    return float(np.sum(_abs_affine_integral(np.diff(x), gx[:-1] - level, gx[1:] - level)))


def var_of_p_composed(g, pot):
    """Total variation of p(g(x)); p is nondecreasing, so each cell is monotone."""
    p = pot.transition_cost_array(g.node_values)
    return float(np.sum(np.abs(np.diff(p))))


def step_variation(s):
    return int(sum(abs(j) for j in s.jumps))


def write_samples_csv(path, x, values):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "value"])
        for xi, vi in zip(np.asarray(x, dtype=float), np.asarray(values, dtype=float)):
            writer.writerow([repr(float(xi)), repr(float(vi))])


def read_samples_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    x = np.array([float(r["x"]) for r in rows])
    v = np.array([float(r["value"]) for r in rows])
    return x, v

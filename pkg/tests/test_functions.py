import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fkup.functions import (
    ChainState,
    PiecewiseAffine,
    StepFunction,
    UniformPartition,
    dirichlet_energy,
    eval_pa,
    interpolate,
    l1_distance_window,
    l2_distance,
    read_samples_csv,
    step_variation,
    var_of_p_composed,
    write_samples_csv,
)
from fkup.quadrature import gauss_legendre_unit


def vbar(x):
    return 0.5 * (np.tanh(x) + 1.0)


def tanh_wall(amplitude, width, centre):
    def f(x):
        return amplitude * 0.5 * (np.tanh((x - centre) / width) + 1.0)

    # int f'^2 = amplitude^2 / (3 width)
    return f, amplitude**2 / (3.0 * width)


def l2_to_callable(g, f, a, b, cells=400_000):
    edges = np.linspace(a, b, cells + 1)
    t, w = gauss_legendre_unit(8)
    x = (edges[:-1, None] + np.diff(edges)[:, None] * t).ravel()
    d2 = ((g(x) - f(x)) ** 2).reshape(-1, 8) @ w
    return math.sqrt(float(np.sum(np.diff(edges) * d2)))


def ramp(spacing=0.5, values=(0.0, 0.0, 1.0, 1.0), i_min=-1):
    part = UniformPartition(spacing, i_min, i_min + len(values) - 1)
    return PiecewiseAffine(part, np.array(values, dtype=float))


class TestPartition:
    def test_needs_two_cells(self):
        with pytest.raises(ValueError):
            UniformPartition(0.1, 0, 1)

    def test_symmetric_window_contains_origin(self):
        p = UniformPartition.symmetric(0.05, 20)
        assert p.i_min == -400 and p.i_max == 400
        assert 0.0 in p.nodes

    def test_shift(self):
        p = UniformPartition(0.1, -3, 5).shifted(2)
        assert (p.i_min, p.i_max) == (-1, 7)


class TestInterpolate:
    def test_affine_reproduced(self):
        part = UniformPartition.symmetric(0.3, 3)
        f = lambda x: 2.0 * x - 1.0
        g = interpolate(f, part)
        x = np.linspace(*part.bounds, 77)
        np.testing.assert_allclose(g(x), f(x), atol=1e-13)

    def test_constant(self):
        g = interpolate(lambda x: np.full_like(x, 3.0), UniformPartition.symmetric(0.5, 2), (3.0, 3.0))
        assert np.all(g.node_values == 3.0)

    def test_tail_mismatch(self):
        with pytest.raises(ValueError, match="tails"):
            interpolate(vbar, UniformPartition.symmetric(0.1, 5), (0.0, 1.0))

    def test_l2_error_of_reference_profile(self):
        rho = 0.1
        g = interpolate(vbar, UniformPartition.symmetric(rho, 20), (0.0, 1.0))
        err = l2_to_callable(g, vbar, -20, 20)
        assert err <= 2.0 * rho * math.sqrt(1.0 / 3.0)

    def test_l2_error_is_second_order(self):
        errs = [
            l2_to_callable(interpolate(vbar, UniformPartition.symmetric(r, 20), (0.0, 1.0)), vbar, -20, 20)
            for r in (0.1, 0.05)
        ]
        assert 3.5 <= errs[0] / errs[1] <= 4.5


class TestEvaluation:
    def test_nodes_midpoints_and_tails(self):
        g = ramp()
        assert eval_pa(g, 0.5) == 1.0
        assert eval_pa(g, 0.25) == 0.5
        assert eval_pa(g, 100.0) == g.right_tail == 1.0
        assert eval_pa(g, -100.0) == g.left_tail == 0.0

    def test_node_count_checked(self):
        with pytest.raises(ValueError):
            PiecewiseAffine(UniformPartition(0.1, 0, 3), np.zeros(3))


class TestDirichlet:
    def test_constant_is_zero(self):
        assert dirichlet_energy(ramp(values=(2.0, 2.0, 2.0))) == 0.0

    def test_single_ramp(self):
        rho, s = 0.25, 3.0
        g = ramp(spacing=rho, values=(0.0, 0.0, s * rho, s * rho))
        assert dirichlet_energy(g) == pytest.approx(s * s * rho)

    def test_reference_profile_converges_from_below(self):
        vals = [
            dirichlet_energy(interpolate(vbar, UniformPartition.symmetric(r, 20), (0.0, 1.0)))
            for r in (0.2, 0.1, 0.05, 0.025)
        ]
        assert all(v <= 1.0 / 3.0 for v in vals)
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        assert vals[-1] == pytest.approx(1.0 / 3.0, rel=1e-3)

    @settings(max_examples=50, deadline=None)
    @given(
        st.floats(0.5, 3.0),
        st.floats(0.2, 3.0),
        st.floats(-1.0, 1.0),
        st.sampled_from([0.4, 0.2, 0.1, 0.05]),
    )
    def test_jensen_and_refinement(self, amplitude, width, centre, rho):
        f, exact = tanh_wall(amplitude, width, centre)
        half = 30.0
        tails = (float(f(-half)), float(f(half)))
        coarse = dirichlet_energy(interpolate(f, UniformPartition.symmetric(rho, half), tails))
        fine = dirichlet_energy(interpolate(f, UniformPartition.symmetric(rho / 2, half), tails))
        assert coarse <= exact + 1e-12
        assert coarse <= fine + 1e-12


class TestDistances:
    def test_self_distance(self):
        g = ramp()
        assert l2_distance(g, g) == 0.0

    def test_constants_l1(self):
        g1 = ramp(values=(1.0, 1.0, 1.0))
        g2 = ramp(values=(3.5, 3.5, 3.5))
        assert l1_distance_window(g1, g2, -2.0, 5.0) == pytest.approx(2.5 * 7.0)

    def test_unequal_tails(self):
        with pytest.raises(ValueError, match="infinite"):
            l2_distance(ramp(), ramp(values=(0.0, 0.0, 2.0, 2.0)))

    def test_different_partitions_exact(self):
        # g1 = x on [0,1] (spacing 1/2), g2 = 0 on spacing 1/3; integral of x^2 on [0,1] = 1/3
        g1 = PiecewiseAffine(UniformPartition(0.5, 0, 2), np.array([0.0, 0.5, 1.0]))
        g2 = PiecewiseAffine(UniformPartition(1 / 3, 0, 3), np.array([0.0, 1 / 3, 2 / 3, 1.0]))
        assert l2_distance(g1, g2) == pytest.approx(0.0, abs=1e-15)
        g3 = PiecewiseAffine(UniformPartition(1 / 3, 0, 3), np.array([0.0, 0.0, 0.0, 1.0]))
        # difference is x on [0, 2/3], then x - 3(x - 2/3) on [2/3, 1]
        exact = (2 / 3) ** 3 / 3 + (1 / 3) * ((2 / 3) ** 2 + 0.0 + 0.0) / 3
        assert l2_distance(g1, g3) == pytest.approx(math.sqrt(exact), rel=1e-13)

    def test_l1_sign_change(self):
        g = PiecewiseAffine(UniformPartition(1.0, 0, 2), np.array([-1.0, 1.0, 1.0]))
        z = PiecewiseAffine(UniformPartition(1.0, 0, 2), np.zeros(3))
        assert l1_distance_window(g, z, 0.0, 1.0) == pytest.approx(0.5)

    def test_l1_to_step(self):
        s = StepFunction.unit_step()
        g = PiecewiseAffine(UniformPartition(0.5, -1, 1), np.array([0.0, 0.5, 1.0]))
        assert l1_distance_window(g, s, -3.0, 3.0) == pytest.approx(0.25)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31))
    def test_triangle_inequality(self, seed):
        rng = np.random.default_rng(seed)
        gs = []
        for _ in range(3):
            spacing = rng.choice([0.1, 0.15, 0.25])
            part = UniformPartition.symmetric(spacing, rng.uniform(1.0, 3.0))
            v = rng.uniform(-1, 2, part.size)
            v[0], v[-1] = 0.0, 1.0
            gs.append(PiecewiseAffine(part, v))
        a, b, c = gs
        assert l2_distance(a, c) <= l2_distance(a, b) + l2_distance(b, c) + 1e-10
        assert l2_distance(a, b) == pytest.approx(l2_distance(b, a), abs=1e-12)


class TestVariation:
    def test_var_of_p(self, pot):
        assert var_of_p_composed(ramp(values=(0.0, 0.0, 0.0)), pot) == 0.0
        assert var_of_p_composed(ramp(), pot) == pytest.approx(pot.p_bar, abs=1e-8)
        back = ramp(values=(0.0, 1.0, 0.0))
        assert var_of_p_composed(back, pot) == pytest.approx(2 * pot.p_bar, abs=1e-8)

    @pytest.mark.parametrize("levels,expected", [((3,), 0), ((0, 1), 1), ((0, 2, 1), 3)])
    def test_step_variation(self, levels, expected):
        s = StepFunction(tuple(range(len(levels) - 1)), levels)
        assert step_variation(s) == expected

    def test_step_function_validation(self):
        with pytest.raises(ValueError):
            StepFunction((0.0,), (1, 1))
        with pytest.raises(ValueError):
            StepFunction((1.0, 0.0), (0, 1, 2))
        with pytest.raises(ValueError):
            StepFunction((0.0,), (0, 0.5))

    def test_step_evaluation(self):
        s = StepFunction((0.0, 5.0), (0, 2, 1))
        np.testing.assert_array_equal(s(np.array([-1.0, 1.0, 6.0])), [0, 2, 1])


class TestSerialization:
    def test_piecewise_affine_roundtrip(self):
        g = ramp()
        h = PiecewiseAffine.from_dict(g.to_dict())
        assert h.partition == g.partition
        np.testing.assert_array_equal(h.node_values, g.node_values)

    def test_step_roundtrip(self):
        s = StepFunction((0.0, 5.0), (0, 2, 1))
        t = StepFunction.from_dict(s.to_dict())
        assert (t.breakpoints, t.levels) == (s.breakpoints, s.levels)

    def test_csv(self, tmp_path):
        g = ramp()
        path = tmp_path / "g.csv"
        write_samples_csv(path, g.nodes, g.node_values)
        assert path.read_text().splitlines()[0] == "x,value"
        x, v = read_samples_csv(path)
        np.testing.assert_array_equal(x, g.nodes)
        np.testing.assert_array_equal(v, g.node_values)


def test_chain_lift():
    c = ChainState(0.1, [0.0, 0.3, 1.0], i_min=-1)
    g = c.lift()
    assert g.partition == UniformPartition(0.1, -1, 1)
    assert (c.left_clamp, c.right_clamp) == (0.0, 1.0)

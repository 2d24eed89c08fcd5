import json
import math

import numpy as np
import pytest

from cpwlnet.cpwl import CpwlFunction, Grid, eval_cpwl, to_json
from cpwlnet.kst import (
    CSV_HEADER,
    LOG10_2,
    KstValidationError,
    build_kst_net,
    default_lambdas,
    demo_problem,
    eval_kst_target,
    junction_values,
    kst_error_bound,
    loglog_slope,
    make_inner_surrogate,
    make_problem,
    measure_error,
    outer_segments,
    problem_from_json,
    problem_to_json,
    rate_experiment,
    tensor_grid,
)
from cpwlnet.network import forward


def linear_inner():
    return CpwlFunction(Grid.uniform(1), np.array([0.0, LOG10_2]))


def identity_chain(d):
    return make_problem(
        d,
        {"kind": "builtin", "name": "linear"},
        lambdas=np.full(d, 1.0 / d),
        inners=[linear_inner() for _ in range(2 * d + 1)],
    )


def aligned_problem(rng, d=2, N=2, L=1):
    """Inners CPwL on the inner grid, outer CPwL on a subgrid of the outer grid."""
    t1 = Grid.uniform(N * N * L)
    inners = []
    for _ in range(2 * d + 1):
        v = np.concatenate([[0.0], np.cumsum(rng.uniform(0.5, 1.0, t1.segment_count) * LOG10_2 / t1.segment_count)])
        inners.append(CpwlFunction(t1, v))
    coarse = outer_segments(d, N, L) // 5
    g = CpwlFunction(Grid.uniform(coarse, 0.0, float(d)), rng.uniform(-1, 1, coarse + 1))
    return make_problem(d, {"kind": "cpwl", "function": g}, inners=inners)


class TestSurrogates:
    @pytest.mark.parametrize("k", range(5))
    def test_monotone_and_lipschitz(self, k):
        phi = make_inner_surrogate(3, k)
        assert np.all(np.diff(phi.values) > 0)
        assert np.max(phi.slopes()) <= LOG10_2 + 1e-12
        assert phi.lo == 0 and phi.hi == 1

    def test_reproducible(self):
        a, b = make_inner_surrogate(11, 2), make_inner_surrogate(11, 2)
        assert np.array_equal(a.nodes, b.nodes) and np.array_equal(a.values, b.values)
        c = make_inner_surrogate(11, 3)
        assert not np.array_equal(a.values, c.values)

    def test_default_lambdas(self):
        lam = default_lambdas(4)
        assert np.all((lam > 0) & (lam <= 1))
        assert lam[0] == pytest.approx((1 + math.sqrt(2) - 1) / 2)


class TestValidation:
    def test_d_at_least_two(self):
        with pytest.raises(KstValidationError, match="d must be"):
            make_problem(1, {"kind": "builtin", "name": "zero"})

    def test_inner_count(self):
        with pytest.raises(KstValidationError, match="2d\\+1"):
            make_problem(2, {"kind": "builtin", "name": "zero"}, inners=[linear_inner()] * 4)

    def test_non_monotone_inner(self):
        bad = CpwlFunction(Grid.uniform(2), np.array([0.0, 0.2, 0.1]))
        with pytest.raises(KstValidationError, match="inner 2: not strictly increasing"):
            make_problem(2, {"kind": "builtin", "name": "zero"}, inners=[linear_inner()] * 2 + [bad] + [linear_inner()] * 2)

    def test_steep_inner(self):
        steep = CpwlFunction(Grid.uniform(1), np.array([0.0, 0.5]))
        with pytest.raises(KstValidationError, match="Lipschitz"):
            make_problem(2, {"kind": "builtin", "name": "zero"}, inners=[steep] * 5)

    @pytest.mark.parametrize("lam", [[0.5], [0.0, 0.5], [0.5, 1.5]])
    def test_lambdas(self, lam):
        with pytest.raises(KstValidationError, match="lambdas"):
            make_problem(2, {"kind": "builtin", "name": "zero"}, lambdas=lam)

    def test_outer_domain(self):
        g = CpwlFunction(Grid.uniform(4), np.zeros(5))
        with pytest.raises(KstValidationError, match="domain"):
            make_problem(2, {"kind": "cpwl", "function": g})

    def test_unknown_outer(self):
        with pytest.raises(KstValidationError):
            make_problem(2, {"kind": "builtin", "name": "nope"})
        with pytest.raises(KstValidationError):
            make_problem(2, {"kind": "table"})


class TestTarget:
    @pytest.mark.parametrize("d", [2, 3])
    def test_identity_chain(self, d):
        p = identity_chain(d)
        assert eval_kst_target(p, np.ones(d)) == pytest.approx((2 * d + 1) * LOG10_2)

    def test_zero_outer(self, rng):
        p = make_problem(2, {"kind": "builtin", "name": "zero"})
        assert np.all(eval_kst_target(p, rng.uniform(0, 1, (20, 2))) == 0)

    def test_origin(self):
        p = make_problem(2, {"kind": "builtin", "name": "abs"})
        assert eval_kst_target(p, [0.0, 0.0]) == pytest.approx(5 * 1.0)

    def test_points_checked(self):
        p = identity_chain(2)
        with pytest.raises(ValueError):
            eval_kst_target(p, [0.5, 1.5])
        with pytest.raises(ValueError):
            eval_kst_target(p, [0.5, 0.5, 0.5])


class TestBuild:
    def test_identity_chain_exact(self):
        p = identity_chain(2)
        b = build_kst_net(p, 2, 1)
        X = np.random.default_rng(0).uniform(0, 1, (1000, 2))
        np.testing.assert_allclose(forward(b.net, X)[:, 0], eval_kst_target(p, X), atol=1e-9)

    def test_aligned_reproduction(self, rng):
        p = aligned_problem(rng)
        b = build_kst_net(p, 2, 1)
        assert measure_error(p, b.net, 41) <= 1e-8

    @pytest.mark.parametrize("N, L", [(2, 1), (3, 2), (1, 3)])
    def test_depth(self, N, L):
        b = build_kst_net(demo_problem(0), N, L)
        assert b.depth == 2 * (L + 1)

    def test_stage_widths(self):
        d = 2
        b = build_kst_net(demo_problem(1, d), 3, 2)
        inner = b.inner_nets[0].hidden_widths
        assert all(n.hidden_widths == inner for n in b.inner_nets)
        assert b.inner_stage_widths == tuple(d * (2 * d + 1) * w for w in inner)
        assert b.outer_stage_widths == tuple((2 * d + 1) * w for w in b.outer_net.hidden_widths)
        assert b.net.hidden_widths == b.inner_stage_widths + b.outer_stage_widths

    @pytest.mark.parametrize("seed", [0, 3])
    def test_junction_in_range(self, seed):
        p = demo_problem(seed)
        b = build_kst_net(p, 2, 2)
        X = tensor_grid(2, 31)
        t = junction_values(b, X, p.d)
        assert np.all(t >= -1e-12) and np.all(t <= p.d + 1e-12)

    def test_bad_params(self):
        with pytest.raises(ValueError):
            build_kst_net(identity_chain(2), 0, 1)


class TestBound:
    def test_value(self):
        p = make_problem(2, {"kind": "builtin", "name": "abs"})
        assert kst_error_bound(p, 2, 1) == pytest.approx(7.5 * LOG10_2)
        assert kst_error_bound(p, 2, 1) == pytest.approx(2.2577, abs=1e-4)

    def test_constant_outer(self):
        assert kst_error_bound(make_problem(2, {"kind": "builtin", "name": "zero"}), 3, 3) == 0

    def test_scaling(self):
        p = make_problem(3, {"kind": "builtin", "name": "linear", "params": {"slope": 2.0}})
        b = kst_error_bound(p, 2, 1)
        assert kst_error_bound(p, 4, 1) == pytest.approx(b / 4)
        assert kst_error_bound(p, 2, 2) == pytest.approx(b / 2)

    @pytest.mark.parametrize("N, L", [(1, 1), (2, 1), (3, 2)])
    def test_measured_below_bound(self, N, L):
        p = make_problem(2, {"kind": "builtin", "name": "abs"}, seed=4)
        b = build_kst_net(p, N, L)
        assert measure_error(p, b.net, 51) <= kst_error_bound(p, N, L) + 1e-9

    def test_empirical_modulus(self):
        p = make_problem(2, {"kind": "builtin", "name": "abs"}).with_empirical_modulus()
        assert p.modulus_estimated and p.lipschitz is None
        assert kst_error_bound(p, 2, 1) == pytest.approx(7.5 * LOG10_2, rel=1e-3)

    def test_needs_modulus(self):
        p = make_problem(2, {"kind": "builtin", "name": "abs"})
        p.lipschitz = None
        with pytest.raises(ValueError):
            kst_error_bound(p, 2, 1)


class TestDemoProblem:
    def test_kinks_sit_where_only_branch_zero_reaches(self):
        p = demo_problem(0)
        kinks = np.asarray(p.outer_spec["params"]["kinks"])
        reach = [p.lambdas.sum() * phi.values[-1] for phi in p.inners]
        assert kinks.size >= 5
        assert np.all(kinks > max(reach[1:])) and np.all(kinks < reach[0])

    def test_deterministic(self):
        a, b = demo_problem(2), demo_problem(2)
        assert a.outer_spec == b.outer_spec
        X = tensor_grid(2, 7)
        np.testing.assert_array_equal(eval_kst_target(a, X), eval_kst_target(b, X))

    def test_outer_is_lipschitz_one(self):
        p = demo_problem(0)
        ts = np.linspace(0, 2, 20001)
        assert np.max(np.abs(np.diff(p.outer(ts)) / np.diff(ts))) <= 1 + 1e-9
        assert p.lipschitz == 1.0


class TestRateExperiment:
    def test_rows_and_slopes(self):
        res = rate_experiment(demo_problem(0), [2, 4], [1, 2], 41)
        assert len(res.rows()) == 4 and len(res.rows()[0]) == len(CSV_HEADER)
        assert set(res.slopes_N) == {1, 2} and set(res.slopes_L) == {2, 4}
        assert all(r.measured_error <= r.bound for r in res.records)

    def test_degenerate(self):
        res = rate_experiment(make_problem(2, {"kind": "builtin", "name": "zero"}), [1, 2], [1], 11)
        assert res.degenerate and not res.slopes_N

    def test_empty_lists(self):
        with pytest.raises(ValueError):
            rate_experiment(identity_chain(2), [], [1])

    def test_loglog_slope(self):
        assert loglog_slope([1, 2, 4], [1, 0.25, 1 / 16]) == pytest.approx(-2)


class TestJson:
    def test_builtin_round_trip(self):
        p = demo_problem(0)
        q = problem_from_json(json.loads(json.dumps(problem_to_json(p))))
        X = tensor_grid(2, 9)
        np.testing.assert_array_equal(eval_kst_target(p, X), eval_kst_target(q, X))
        assert q.lipschitz == p.lipschitz

    def test_cpwl_round_trip(self, rng):
        p = aligned_problem(rng)
        obj = json.loads(json.dumps(problem_to_json(p)))
        assert obj["outer"]["kind"] == "cpwl" and "nodes" in obj["outer"]["function"]
        q = problem_from_json(obj)
        X = tensor_grid(2, 9)
        np.testing.assert_array_equal(eval_kst_target(p, X), eval_kst_target(q, X))

    def test_missing_field(self):
        obj = problem_to_json(demo_problem(0))
        del obj["inners"]
        from cpwlnet.io import SchemaError

        with pytest.raises(SchemaError, match="inners"):
            problem_from_json(obj)

    def test_bundled_demo_matches_generator(self):
        from importlib import resources

        obj = json.loads(resources.files("cpwlnet").joinpath("data/kst_demo.json").read_text())
        assert obj == json.loads(json.dumps(problem_to_json(demo_problem(0, 2))))

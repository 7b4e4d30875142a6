import dataclasses
import math

import numpy as np
import pytest

from pbwpcn import (
    DomainError,
    PairChannel,
    derive_pair,
    gamma,
    grad_s,
    respond_to_price,
    s_of_e,
    tau_of_e,
    throughput,
    waterfill,
)

from conftest import random_instance, weighted_rate_grid

GOLDEN_ALPHA = (0.4543, 4.7802, 5.6834)
GOLDEN_E_LIM = (0.0989, 0.1676, 0.3299)
GOLDEN_E_OPT = (0.6325, 0.8307, 1.3247)


def multiset_close(computed, golden, rtol=1e-3):
    a = sorted(computed)
    b = sorted(golden)
    assert len(a) == len(b)
    for x, y in zip(a, b):
        assert x == pytest.approx(y, rel=rtol)


class TestDerivePair:
    def test_golden_constants(self, paper):
        params, channels = paper
        ds = [derive_pair(params, ch, w) for ch, w in zip(channels, params.weights)]
        multiset_close([d.alpha for d in ds], GOLDEN_ALPHA)
        multiset_close([d.e_lim for d in ds], GOLDEN_E_LIM)
        multiset_close([d.e_opt for d in ds], GOLDEN_E_OPT)

    def test_ordering_invariants(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            params, channels, ds = random_instance(rng, 1)
            d = ds[0]
            assert d.z_ddag > d.z_dag > 1.0
            assert 0.0 < d.e_lim < d.e_opt < params.p_pb
            assert d.alpha > 0.0

    def test_vanishing_beacon_channel(self, paper):
        # K -> 0 kills the marginal value of beacon energy
        params, channels = paper
        base = channels[0]
        alphas = []
        for scale in (1.0, 1e-3, 1e-6, 1e-9):
            d = derive_pair(params, PairChannel(base.g_pow, base.k_pow * scale), 10.0)
            alphas.append(d.alpha)
        assert all(b < a for a, b in zip(alphas, alphas[1:]))
        assert alphas[-1] < 1e-6 * alphas[0]


class TestTauOfE:
    def test_continuous_at_knee(self, paper):
        params, channels = paper
        for ch, w in zip(channels, params.weights):
            d = derive_pair(params, ch, w)
            below = tau_of_e(params, ch, d, d.e_lim * (1.0 - 1e-9))
            at = tau_of_e(params, ch, d, d.e_lim)
            above = tau_of_e(params, ch, d, d.e_lim * (1.0 + 1e-9))
            assert at == pytest.approx(d.e_lim / params.p_pb, rel=1e-9)
            assert below == pytest.approx(at, rel=1e-6)
            assert above == pytest.approx(at, rel=1e-6)

    def test_zero_energy_against_grid(self, paper):
        params, channels = paper
        ch = channels[2]
        d = derive_pair(params, ch, params.weights[2])
        t_star = tau_of_e(params, ch, d, 0.0)
        assert t_star == pytest.approx(0.50, abs=0.01)
        grid = np.arange(1e-5, 1.0, 1e-5)
        vals = weighted_rate_grid(params, ch, params.weights[2], grid, 0.0)
        best = params.weights[2] * throughput(params, ch, t_star, 0.0)
        assert best >= vals.max() - 1e-7

    def test_second_branch_exact_ratio(self, paper):
        params, channels = paper
        ch = channels[1]
        d = derive_pair(params, ch, params.weights[1])
        e = 0.5 * (d.e_lim + d.e_opt)
        assert tau_of_e(params, ch, d, e) == e / params.p_pb

    def test_domain(self, paper):
        params, channels = paper
        d = derive_pair(params, channels[0], 10.0)
        with pytest.raises(DomainError):
            tau_of_e(params, channels[0], d, params.p_pb)


class TestSOfE:
    def test_zero_energy_matches_throughput(self, paper):
        params, channels = paper
        for ch, w in zip(channels, params.weights):
            d = derive_pair(params, ch, w)
            t0 = tau_of_e(params, ch, d, 0.0)
            assert s_of_e(params, ch, d, 0.0) == pytest.approx(
                w * throughput(params, ch, t0, 0.0), rel=1e-10
            )

    def test_composition_identity(self):
        # s_of_e must equal the weighted throughput at its own best time
        rng = np.random.default_rng(11)
        for _ in range(30):
            params, channels, ds = random_instance(rng, 1)
            ch, d = channels[0], ds[0]
            for frac in (0.0, 0.3, 0.8, 0.99):
                e = frac * d.e_opt
                t = tau_of_e(params, ch, d, e)
                expected = params.weights[0] * throughput(params, ch, t, e)
                assert s_of_e(params, ch, d, e) == pytest.approx(expected, rel=1e-10)

    def test_continuous_at_knee(self, paper):
        params, channels = paper
        for ch, w in zip(channels, params.weights):
            d = derive_pair(params, ch, w)
            below = s_of_e(params, ch, d, d.e_lim * (1.0 - 1e-10))
            above = s_of_e(params, ch, d, d.e_lim * (1.0 + 1e-10))
            assert below == pytest.approx(above, rel=1e-8)

    def test_peak_at_e_opt(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            params, channels, ds = random_instance(rng, 1)
            ch, d = channels[0], ds[0]
            peak = s_of_e(params, ch, d, d.e_opt)
            for delta in (-1e-3, 1e-3):
                e = d.e_opt * (1.0 + delta)
                if 0.0 <= e < params.p_pb:
                    assert s_of_e(params, ch, d, e) <= peak + 1e-12


class TestGradS:
    def test_equals_alpha_on_linear_branch(self, paper):
        params, channels = paper
        for ch, w in zip(channels, params.weights):
            d = derive_pair(params, ch, w)
            for frac in (0.0, 0.5, 1.0):
                assert grad_s(params, ch, d, frac * d.e_lim) == d.alpha

    def test_vanishes_at_e_opt(self):
        rng = np.random.default_rng(13)
        for _ in range(30):
            params, channels, ds = random_instance(rng, 1)
            g = grad_s(params, channels[0], ds[0], ds[0].e_opt)
            assert abs(g) <= 1e-9 * ds[0].alpha

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(14)
        for _ in range(50):
            params, channels, ds = random_instance(rng, 1)
            ch, d = channels[0], ds[0]
            # sample on the concave branch, away from the knee
            e = float(rng.uniform(1.05 * d.e_lim, 0.98 * d.e_opt))
            h = 1e-6 * d.e_opt
            fd = (s_of_e(params, ch, d, e + h) - s_of_e(params, ch, d, e - h)) / (2 * h)
            assert grad_s(params, ch, d, e) == pytest.approx(fd, rel=1e-5)

    def test_nonincreasing(self):
        rng = np.random.default_rng(15)
        params, channels, ds = random_instance(rng, 1)
        ch, d = channels[0], ds[0]
        grid = np.linspace(0.0, 0.999 * d.e_opt, 400)
        vals = [grad_s(params, ch, d, float(e)) for e in grid]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


class TestGamma:
    def test_zero_price_gives_e_opt(self):
        rng = np.random.default_rng(16)
        for _ in range(20):
            params, channels, ds = random_instance(rng, 1)
            g = gamma(params, channels[0], ds[0], 0.0)
            assert g == pytest.approx(ds[0].e_opt, rel=1e-10)

    def test_price_near_cap_gives_e_lim(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            params, channels, ds = random_instance(rng, 1)
            d = ds[0]
            g = gamma(params, channels[0], d, d.alpha * (1.0 - 1e-9))
            assert g == pytest.approx(d.e_lim, rel=1e-6)

    def test_inverts_gradient(self):
        rng = np.random.default_rng(18)
        for _ in range(50):
            params, channels, ds = random_instance(rng, 1)
            ch, d = channels[0], ds[0]
            nu = float(rng.uniform(0.0, d.alpha * 0.999))
            e = gamma(params, ch, d, nu)
            assert d.e_lim <= e <= d.e_opt * (1.0 + 1e-12)
            assert grad_s(params, ch, d, e) == pytest.approx(nu, abs=1e-8 * d.alpha)

    def test_domain(self, paper):
        params, channels = paper
        d = derive_pair(params, channels[0], 10.0)
        with pytest.raises(DomainError):
            gamma(params, channels[0], d, d.alpha)
        with pytest.raises(DomainError):
            gamma(params, channels[0], d, -0.1)


class TestRespondToPrice:
    def test_branches(self, paper):
        params, channels = paper
        ch = channels[0]
        d = derive_pair(params, ch, 10.0)
        assert respond_to_price(params, ch, d, 2.0 * d.alpha) == 0.0
        assert respond_to_price(params, ch, d, d.alpha) == d.e_lim
        assert respond_to_price(params, ch, d, d.alpha, is_marginal=True) == d.e_lim
        low = respond_to_price(params, ch, d, 0.5 * d.alpha)
        assert d.e_lim < low < d.e_opt
        assert respond_to_price(params, ch, d, 0.0) == pytest.approx(d.e_opt, rel=1e-10)

    def test_negative_price(self, paper):
        params, channels = paper
        d = derive_pair(params, channels[0], 10.0)
        with pytest.raises(DomainError):
            respond_to_price(params, channels[0], d, -1.0)


class TestWaterfill:
    def test_paper_budget_one(self, paper):
        params, channels = paper
        res = waterfill(params, channels)
        assert math.fsum(res.e_star) == pytest.approx(1.0, abs=1e-10)
        # price settles strictly between the two smallest caps
        assert 0.4543 < res.nu < 4.7802
        for e, t in zip(res.e_star, res.tau_star):
            assert 0.0 <= e
            assert 0.0 < t < 1.0
        assert res.welfare > 0.0

    def test_paper_slack_budget(self, paper):
        params, channels = paper
        params = dataclasses.replace(params, e_b_tot=3.0)
        res = waterfill(params, channels)
        assert res.nu == 0.0
        multiset_close(res.e_star, GOLDEN_E_OPT, rtol=1e-3)
        assert math.fsum(res.e_star) < 3.0

    def test_zero_budget(self, paper):
        params, channels = paper
        params = dataclasses.replace(params, e_b_tot=0.0)
        res = waterfill(params, channels)
        assert res.e_star == (0.0, 0.0, 0.0)
        assert all(0.0 < t < 1.0 for t in res.tau_star)
        assert res.welfare > 0.0  # APs still self-charge

    def test_tie_breaking_identical_pairs(self, paper):
        # two clones must end up with equal energy when the price lands on
        # their shared cap
        params, channels = paper
        ch = channels[2]
        d = derive_pair(params, ch, 10.0)
        from pbwpcn import SystemParams

        budget = 2.0 * d.e_lim * 0.7
        params2 = SystemParams(0.1, 1e-11, 0.5, 1.0, 2.0, (10.0, 10.0), budget)
        res = waterfill(params2, [ch, ch])
        assert res.e_star[0] == pytest.approx(res.e_star[1], rel=1e-12)
        assert math.fsum(res.e_star) == pytest.approx(budget, abs=1e-12)
        assert res.nu == pytest.approx(d.alpha, rel=1e-9)

    def test_budget_binds_generically(self):
        rng = np.random.default_rng(19)
        for _ in range(30):
            params, channels, ds = random_instance(rng, int(rng.integers(2, 5)))
            res = waterfill(params, channels)
            assert math.fsum(res.e_star) == pytest.approx(
                params.e_b_tot, rel=1e-10
            )
            assert res.nu > 0.0

    def test_welfare_concave_in_budget(self, paper):
        # optimal value of a concave program is concave in the budget
        params, channels = paper
        budgets = np.linspace(0.1, 2.5, 25)
        vals = []
        for b in budgets:
            p = dataclasses.replace(params, e_b_tot=float(b))
            vals.append(waterfill(p, channels).welfare)
        second = np.diff(vals, 2)
        assert np.all(second <= 1e-9)

    def test_energy_monotone_in_budget(self, paper):
        params, channels = paper
        prev = None
        for b in (0.2, 0.5, 0.8, 1.2, 1.8, 2.4):
            p = dataclasses.replace(params, e_b_tot=b)
            res = waterfill(p, channels)
            if prev is not None:
                for e_new, e_old in zip(res.e_star, prev):
                    assert e_new >= e_old - 1e-9
            prev = res.e_star

    def test_round_count_is_sweep_plus_bisection(self, paper):
        params, channels = paper
        res = waterfill(params, channels)
        # at most one announcement per distinct cap, plus one bounded bisection
        assert res.rounds <= 3 + 200
        assert res.rounds >= 2
        announce_rounds = [r for r in res.transcript if "round" in r]
        assert len(announce_rounds) == res.rounds

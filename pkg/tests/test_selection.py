import math

import numpy as np
import pytest

import oracles
from mlvsbm.generate import simulate_design
from mlvsbm.icl import icl_mlvsbm, icl_sbm, map_params, penalty_mlvsbm, penalty_sbm
from mlvsbm.model import VariationalState, complete_log_likelihood, sbm_complete_log_likelihood
from mlvsbm.network import MultilevelNetwork, full_mask
from mlvsbm.params import ModelParams, SBMParams
from mlvsbm.selection import SelectOptions, propose_merge, propose_split, select
from mlvsbm.vem import FitOptions, FitResult, SBMFit, fit

FAST = SelectOptions(q_max=6, fit=FitOptions(n_random_restarts=2))


class TestPenalty:
    def test_arithmetic(self):
        want = 3 * math.log(1770) + 3 * math.log(60) + 3 * math.log(190) + math.log(20)
        assert penalty_mlvsbm(3, 3, 60, 20) == pytest.approx(want, abs=1e-12)

    def test_single_blocks(self):
        want = 0.5 * math.log(60 * 59 / 2) + 0.5 * math.log(20 * 19 / 2)
        assert penalty_mlvsbm(1, 1, 60, 20) == pytest.approx(want, abs=1e-12)

    @pytest.mark.parametrize("q_ind", [1, 2, 3, 5])
    @pytest.mark.parametrize("q_org", [1, 2, 4])
    @pytest.mark.parametrize("n", [(10, 4), (60, 20), (180, 60)])
    def test_gain_identity(self, q_ind, q_org, n):
        n_ind, n_org = n
        gap = (penalty_mlvsbm(q_ind, q_org, n_ind, n_org)
               - penalty_sbm(q_ind, n_ind) - penalty_sbm(q_org, n_org))
        assert gap == pytest.approx(0.5 * (q_org - 1) * (q_ind - 1) * math.log(n_ind), abs=1e-10)

    def test_directed_alpha_term(self):
        assert penalty_sbm(2, 10, directed=True) == pytest.approx(
            0.5 * 4 * math.log(90) + 0.5 * math.log(10), abs=1e-12)

    def test_invalid(self):
        with pytest.raises(ValueError):
            penalty_sbm(0, 10)
        with pytest.raises(ValueError):
            penalty_sbm(1, 1)


class TestICL:
    def test_sbm_one_block_half_density(self):
        x = np.zeros((10, 10), dtype=int)
        ll = sbm_complete_log_likelihood(x, full_mask(10), False,
                                         SBMParams([1.0], [[0.5]]), np.zeros(10, int))
        assert ll == pytest.approx(45 * math.log(0.5), abs=1e-12)
        assert penalty_sbm(1, 10) == pytest.approx(0.5 * math.log(45), abs=1e-12)

    def test_sbm_one_block_closed_form(self):
        rng = np.random.default_rng(0)
        x = np.triu((rng.random((10, 10)) < 0.5).astype(int), 1)
        x = x + x.T
        e = x.sum() // 2
        f = SBMFit(params=None, tau=np.ones((10, 1)), bound=0.0, bound_trace=[],
                   n_iterations=0, converged=True)
        p = e / 45
        want = e * math.log(p) + (45 - e) * math.log(1 - p) - 0.5 * math.log(45)
        assert icl_sbm(x, None, False, f) == pytest.approx(want, abs=1e-10)

    def test_mlvsbm_hand_oracle(self):
        net, _, _ = simulate_design(3, n_ind=12, n_org=5)
        res = fit(net, 2, 2, FitOptions(n_random_restarts=1))
        z = res.map_assignments
        # parameters by counting, likelihood by the scalar-loop oracle
        zi, zo, org_of = z.z_ind, z.z_org, net.org_of
        pi = np.bincount(zo, minlength=2) / 5
        gamma = np.zeros((2, 2))
        for i in range(12):
            gamma[zi[i], zo[org_of[i]]] += 1
        gamma = np.where(gamma.sum(0) > 0, gamma / np.maximum(gamma.sum(0), 1), 0.5)

        def alpha(x, z):
            a = np.zeros((2, 2))
            for k in range(2):
                for l in range(2):
                    rows, cols = np.flatnonzero(z == k), np.flatnonzero(z == l)
                    pairs = [(i, j) for i in rows for j in cols if i != j]
                    a[k, l] = (np.mean([x[i, j] for i, j in pairs]) if pairs
                               else x.sum() / (len(z) * (len(z) - 1)))
            return np.clip(a, 1e-9, 1 - 1e-9)

        params = ModelParams(pi, gamma, alpha(net.x_ind, zi), alpha(net.x_org, zo))
        want = oracles.complete_loglik_net(net, params, zi, zo) - penalty_mlvsbm(2, 2, 12, 5)
        assert icl_mlvsbm(net, res) == pytest.approx(want, abs=1e-8)

    def test_single_org_block_is_sum_of_sbm(self):
        net, _, _ = simulate_design(1, n_ind=60, n_org=20)
        for q in [(3, 1), (1, 2)]:
            res = fit(net, *q, FitOptions(n_random_restarts=1))
            parts = []
            for x, m, tau in ((net.x_ind, net.mask_ind, res.state.tau_ind),
                              (net.x_org, net.mask_org, res.state.tau_org)):
                f = SBMFit(params=None, tau=tau, bound=0.0, bound_trace=[], n_iterations=0,
                           converged=True)
                parts.append(icl_sbm(x, m, False, f))
            assert icl_mlvsbm(net, res) == pytest.approx(sum(parts), abs=1e-8)

    def test_below_map_loglik(self):
        net, _, _ = simulate_design(2, n_ind=40, n_org=12)
        res = fit(net, 2, 2, FitOptions(n_random_restarts=1))
        z = res.map_assignments
        ll = complete_log_likelihood(net, map_params(net, z, 2, 2), z)
        assert icl_mlvsbm(net, res) < ll


def fit_on(x_ind, q_ind=1):
    n = x_ind.shape[0]
    net = MultilevelNetwork(x_ind=x_ind, x_org=np.zeros((2, 2), int),
                            affiliation=np.eye(2, dtype=int)[np.arange(n) % 2])
    return net, fit(net, q_ind, 1, FitOptions(n_random_restarts=1))


class TestProposals:
    def cliques(self):
        x = np.zeros((8, 8), dtype=int)
        x[:4, :4] = 1
        x[4:, 4:] = 1
        np.fill_diagonal(x, 0)
        return x

    def test_split_separates_cliques(self):
        net, f = fit_on(self.cliques())
        z = propose_split(net, f, "ind", 0)
        assert sorted(set(z.tolist())) == [0, 1]
        assert len(set(z[:4].tolist())) == 1 and len(set(z[4:].tolist())) == 1
        assert z[0] != z[4]

    def test_split_singleton_skipped(self):
        net = MultilevelNetwork(x_ind=np.zeros((2, 2), int), x_org=np.zeros((1, 1), int),
                                affiliation=np.ones((2, 1), int))
        params = ModelParams([1.0], [[0.5], [0.5]], np.full((2, 2), 0.1), [[0.1]])
        f = FitResult(params=params, state=VariationalState(np.eye(2), np.ones((1, 1))),
                      bound=0.0, bound_trace=[], n_iterations=0, converged=True)
        assert propose_split(net, f, "ind", 0) is None

    def test_merge_two_blocks(self):
        net, f = fit_on(self.cliques(), 2)
        assert propose_merge(f, "ind", 0, 1).tolist() == [0] * 8

    def test_merge_compacts(self):
        net, _, _ = simulate_design(0, n_ind=60, n_org=20)
        f = fit(net, 3, 3, FitOptions(n_random_restarts=1))
        z = propose_merge(f, "org", 0, 1)
        assert sorted(set(z.tolist())) == [0, 1]
        with pytest.raises(ValueError):
            propose_merge(f, "org", 1, 1)


@pytest.fixture(scope="module")
def dependent():
    net, truth, _ = simulate_design(0)
    return net, truth, select(net, FAST)


class TestSelect:

    def test_dependent_design(self, dependent):
        net, truth, res = dependent
        assert res.best_q == (3, 3)
        assert res.verdict == "dependent"
        assert res.best_icl > res.icl_independent

    def test_explored_icl_recheckable(self, dependent):
        net, _, res = dependent
        for q, f in res.fits.items():
            z = f.map_assignments
            ll = complete_log_likelihood(net, map_params(net, z, *q), z)
            assert res.explored[q] == pytest.approx(ll - penalty_mlvsbm(*q, net.n_ind, net.n_org),
                                                    abs=1e-8)

    def test_trace_starts_at_unilevel_argmax(self, dependent):
        _, _, res = dependent
        assert res.search_trace[0][0] == "start"
        assert res.search_trace[0][1] == (res.sbm_ind.best_q, res.sbm_org.best_q)

    def test_reproducible_and_job_independent(self, dependent):
        net, _, res = dependent
        again = select(net, SelectOptions(q_max=6, fit=FitOptions(n_random_restarts=2), jobs=3))
        assert again.explored == res.explored
        assert again.search_trace == res.search_trace

    def test_independent_design(self):
        net, _, _ = simulate_design(1, delta=1 / 3)
        res = select(net, FAST)
        assert res.verdict == "independent"

    def test_exhaustive_contains_stepwise_best(self):
        net, _, _ = simulate_design(2, n_ind=40, n_org=12)
        opts = SelectOptions(q_max=3, fit=FitOptions(n_random_restarts=2))
        grid = select(net, SelectOptions(q_max=3, fit=opts.fit, exhaustive=True))
        assert set(grid.explored) <= {(a, b) for a in range(1, 4) for b in range(1, 4)}
        assert grid.verdict in ("dependent", "independent")

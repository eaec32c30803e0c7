import numpy as np
import pytest
from scipy.stats import chi2

from mlvsbm._random import make_rng
from mlvsbm.generate import (
    _categorical, design_params, expected_density, gamma_from_delta, sample_affiliation, sample_network,
    simulate_design, topology_alpha,
)
from mlvsbm.network import density
from mlvsbm.params import ModelParams


class TestTopology:
    def test_assortative(self):
        expected = [[0.5, 0.1, 0.1], [0.1, 0.5, 0.1], [0.1, 0.1, 0.5]]
        np.testing.assert_allclose(topology_alpha("assortative", 0.1, 5, 3), expected)

    def test_eps_one_is_erdos_renyi(self):
        np.testing.assert_allclose(topology_alpha("assortative", 0.1, 1, 3), np.full((3, 3), 0.1))

    def test_core_periphery(self):
        expected = [[0.2, 0.2, 0.1], [0.2, 0.1, 0.1], [0.1, 0.1, 0.1]]
        np.testing.assert_allclose(topology_alpha("core-periphery", 0.1, 2, 3), expected)

    def test_disassortative_complements_assortative(self):
        a = topology_alpha("assortative", 0.1, 4, 4)
        b = topology_alpha("disassortative", 0.1, 4, 4)
        np.testing.assert_allclose(a + b, np.full((4, 4), 0.5))

    @pytest.mark.parametrize("args", [("bogus", 0.1, 2, 3), ("assortative", 0.3, 5, 3),
                                      ("assortative", 0.0, 5, 3), ("assortative", 0.1, 0.5, 3)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            topology_alpha(*args)


class TestGamma:
    def test_independence(self):
        np.testing.assert_allclose(gamma_from_delta(1 / 3, 3), np.full((3, 3), 1 / 3))

    def test_identity(self):
        np.testing.assert_allclose(gamma_from_delta(1, 3), np.eye(3))

    def test_point_eight(self):
        g = gamma_from_delta(0.8, 3)
        np.testing.assert_allclose(np.diag(g), 0.8)
        np.testing.assert_allclose(g[~np.eye(3, dtype=bool)], 0.1)
        np.testing.assert_allclose(g.sum(axis=0), 1.0)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            gamma_from_delta(1.2, 3)


class TestAffiliation:
    def test_uniform_rows(self):
        a = sample_affiliation(6, 3, law="uniform", seed=1)
        assert np.all(a.sum(axis=1) == 1)
        assert a.sum(axis=0).sum() == 6

    def test_power_law_skewed(self):
        sizes = sample_affiliation(1000, 10, exponent=2.0, seed=4).sum(axis=0)
        assert sizes.max() > sizes.min()

    def test_single_org(self):
        a = sample_affiliation(7, 1, seed=0)
        assert np.all(a[:, 0] == 1)

    def test_more_orgs_than_individuals_warns(self):
        with pytest.warns(UserWarning):
            sample_affiliation(3, 5, seed=0)


class TestSampleNetwork:
    def test_degenerate_bernoulli(self):
        p = ModelParams(pi_org=[1.0], gamma=[[1.0]], alpha_ind=[[1.0]], alpha_org=[[0.0]])
        net, _ = sample_network(p, sample_affiliation(5, 2, seed=0), seed=0)
        assert np.array_equal(net.x_ind, 1 - np.eye(5))
        assert net.x_org.sum() == 0

    def test_deterministic_membership(self):
        p = design_params(delta=1.0)
        net, z = sample_network(p, sample_affiliation(100, 20, seed=2), seed=3)
        assert np.array_equal(z.z_ind, z.z_org[net.org_of])

    def test_bit_reproducible(self):
        a, za, _ = simulate_design(11)
        b, zb, _ = simulate_design(11)
        assert np.array_equal(a.x_ind, b.x_ind) and np.array_equal(a.x_org, b.x_org)
        assert np.array_equal(za.z_ind, zb.z_ind)

    def test_undirected_symmetric_directed_not(self):
        p = design_params(directed_ind=True)
        net, _ = sample_network(p, sample_affiliation(60, 10, seed=0), seed=0)
        assert not np.array_equal(net.x_ind, net.x_ind.T)
        assert np.array_equal(net.x_org, net.x_org.T)

    def test_org_density_matches_expectation(self):
        p = design_params()
        target = expected_density(p.pi_org, p.alpha_org)
        dens = [density(simulate_design(s)[0].x_org) for s in range(50)]
        assert abs(np.mean(dens) - target) < 0.03

    def test_org_blocks_follow_pi(self):
        pi = np.array([0.2, 0.3, 0.5])
        z = _categorical(make_rng(0), np.tile(pi, (10_000, 1)))
        np.testing.assert_allclose(np.bincount(z, minlength=3) / z.size, pi, atol=0.02)

    def test_independent_gamma_factorizes(self):
        # chi-square test of (z_ind, z_org of its organization) on 10^4 individuals
        p = design_params(delta=1 / 3, d_ind=0.001, eps_ind=1.0, d_org=0.001, eps_org=1.0)
        aff = sample_affiliation(10_000, 300, law="uniform", seed=5)
        rng = make_rng(6)
        z_org = _categorical(rng, np.tile(p.pi_org, (300, 1)))
        org_of = np.argmax(aff, axis=1)
        z_ind = _categorical(rng, p.gamma[:, z_org[org_of]].T)
        table = np.zeros((3, 3))
        np.add.at(table, (z_ind, z_org[org_of]), 1)
        expected = table.sum(1, keepdims=True) * table.sum(0, keepdims=True) / table.sum()
        stat = ((table - expected) ** 2 / expected).sum()
        assert stat < chi2.ppf(0.999, 4)

    def test_rejects_bad_affiliation(self):
        with pytest.raises(ValueError):
            sample_network(design_params(), np.zeros((4, 2)), seed=0)

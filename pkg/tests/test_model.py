import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_network
from dynlat.model import (
    DynamicNetwork,
    Hyperparameters,
    LatentConfiguration,
    link_probability,
    log_joint,
    log_likelihood,
    log_prior_latent,
)
from oracles import (
    beta_prior_logpdf,
    brute_force_log_likelihood,
    per_factor_log_prior,
)


class TestDynamicNetwork:
    def test_rejects_self_loop(self):
        with pytest.raises(ValueError, match="self-loop"):
            DynamicNetwork(n=3, T=1, edges=(frozenset({(1, 1)}),))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            DynamicNetwork(n=3, T=1, edges=(frozenset({(0, 3)}),))

    def test_rejects_asymmetric_undirected(self):
        with pytest.raises(ValueError, match="mirror"):
            DynamicNetwork(n=3, T=1, edges=(frozenset({(0, 1)}),), directed=False)

    def test_from_snapshots_symmetrizes(self):
        net = DynamicNetwork.from_snapshots(3, [{(0, 1)}], directed=False)
        assert (1, 0) in net.edges[0]
        assert net.edge_count == 2

    def test_snapshot_count_mismatch(self):
        with pytest.raises(ValueError, match="snapshots"):
            DynamicNetwork(n=2, T=2, edges=(frozenset(),))

    def test_adjacency_roundtrip(self):
        net = random_network(5, 3, seed=3)
        Y = net.adjacency()
        assert Y.shape == (3, 5, 5)
        assert Y.sum() == net.edge_count
        for t in range(3):
            src, dst = np.nonzero(Y[t])
            assert set(zip(src.tolist(), dst.tolist())) == set(net.edges[t])


class TestHyperparameters:
    def test_rejects_nonpositive_variance(self):
        for bad in ("sigma2", "tau2", "psi2"):
            with pytest.raises(ValueError):
                Hyperparameters(**{bad: 0.0})

    def test_rejects_alpha_out_of_range(self):
        with pytest.raises(ValueError):
            Hyperparameters(alpha=0.0)
        with pytest.raises(ValueError):
            Hyperparameters(alpha=1.5)


class TestLinkProbability:
    def test_same_point_zero_intercept(self):
        assert link_probability(0.0, np.zeros(2), np.zeros(2)) == 0.5

    def test_unit_distance_unit_intercept(self):
        assert link_probability(1.0, np.array([1.0, 0.0]), np.zeros(2)) == pytest.approx(0.5)

    def test_high_precision_scalar(self):
        # logistic of -2.5 from a 50-digit reference
        mpmath.mp.dps = 50
        expected = float(1 / (1 + mpmath.e**2.5))
        got = link_probability(-1.5, np.array([1.0, 0.0]), np.array([0.0, 0.0]))
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(0.07585818002124355, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            link_probability(0.0, np.zeros(2), np.zeros(3))

    def test_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            link_probability(np.nan, np.zeros(2), np.zeros(2))

    def test_monotone_in_distance_and_intercept(self):
        x0 = np.zeros(2)
        for beta in (-2.0, 0.0, 1.5):
            probs = [
                link_probability(beta, np.array([r, 0.0]), x0)
                for r in np.linspace(0.0, 3.0, 25)
            ]
            assert all(a > b for a, b in zip(probs, probs[1:]))
        for r in (0.0, 0.7, 2.0):
            probs = [
                link_probability(beta, np.array([r, 0.0]), x0)
                for beta in np.linspace(-3.0, 3.0, 25)
            ]
            assert all(a < b for a, b in zip(probs, probs[1:]))


class TestLogLikelihood:
    def test_two_isolated_nodes(self):
        net = DynamicNetwork(n=2, T=1, edges=(frozenset(),))
        latent = LatentConfiguration(np.zeros((2, 1, 2)), beta=0.0)
        assert log_likelihood(net, latent) == pytest.approx(2 * math.log(0.5))

    def test_single_node_is_zero(self):
        net = DynamicNetwork(n=1, T=3, edges=(frozenset(),) * 3)
        latent = LatentConfiguration(np.random.default_rng(0).standard_normal((1, 3, 2)), 0.3)
        assert log_likelihood(net, latent) == 0.0

    def test_matches_brute_force(self):
        net = random_network(4, 2, density=0.5, seed=11)
        rng = np.random.default_rng(1)
        latent = LatentConfiguration(rng.standard_normal((4, 2, 2)), beta=0.4)
        assert log_likelihood(net, latent) == pytest.approx(
            brute_force_log_likelihood(net, latent), abs=1e-10
        )

    def test_always_negative(self, rng):
        for seed in range(5):
            net = random_network(5, 2, density=0.4, seed=seed)
            latent = LatentConfiguration(rng.standard_normal((5, 2, 2)), beta=rng.standard_normal())
            assert log_likelihood(net, latent) < 0

    def test_shape_mismatch(self):
        net = random_network(4, 2, seed=0)
        latent = LatentConfiguration(np.zeros((3, 2, 2)), 0.0)
        with pytest.raises(ValueError, match="match"):
            log_likelihood(net, latent)

    def test_permutation_symmetry(self, rng):
        net = random_network(5, 2, density=0.4, seed=5)
        X = rng.standard_normal((5, 2, 2))
        latent = LatentConfiguration(X, beta=-0.2)
        perm = rng.permutation(5)
        relabeled = DynamicNetwork.from_snapshots(
            5,
            [{(int(perm[i]), int(perm[j])) for (i, j) in es} for es in net.edges],
        )
        permuted = LatentConfiguration(X[np.argsort(perm)], beta=-0.2)
        assert log_likelihood(relabeled, permuted) == pytest.approx(
            log_likelihood(net, latent), rel=1e-12
        )

    def test_rotation_isometry(self, rng):
        net = random_network(5, 2, density=0.4, seed=9)
        X = rng.standard_normal((5, 2, 2))
        theta = 1.1
        R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        a = log_likelihood(net, LatentConfiguration(X, 0.1))
        b = log_likelihood(net, LatentConfiguration(X @ R.T, 0.1))
        assert a == pytest.approx(b, rel=1e-12)


class TestLogPrior:
    def test_standard_normal_at_origin(self):
        latent = LatentConfiguration(np.zeros((1, 1, 2)), 0.0)
        hyper = Hyperparameters(sigma2=1.0)
        assert log_prior_latent(latent, hyper) == pytest.approx(-math.log(2 * math.pi))

    def test_constant_trajectory_small_tau(self):
        X = np.tile(np.array([0.3, -0.2]), (1, 4, 1))
        latent = LatentConfiguration(X, 0.0)
        hyper = Hyperparameters(sigma2=1.0, tau2=1e-6)
        got = log_prior_latent(latent, hyper)
        # transition quadratic forms vanish; only normalizers remain
        expected = (
            -0.5 * (0.3**2 + 0.2**2)
            - math.log(2 * math.pi)
            - 3 * (math.log(2 * math.pi) + math.log(1e-6))
        )
        assert got == pytest.approx(expected, rel=1e-12)

    def test_matches_per_factor_oracle(self, rng):
        latent = LatentConfiguration(rng.standard_normal((4, 3, 2)), 0.0)
        hyper = Hyperparameters(sigma2=0.7, tau2=0.2)
        assert log_prior_latent(latent, hyper) == pytest.approx(
            per_factor_log_prior(latent, hyper), rel=1e-12
        )

    def test_rotation_isometry(self, rng):
        X = rng.standard_normal((4, 3, 2))
        theta = 0.6
        R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        hyper = Hyperparameters(sigma2=0.7, tau2=0.2)
        assert log_prior_latent(LatentConfiguration(X, 0.0), hyper) == pytest.approx(
            log_prior_latent(LatentConfiguration(X @ R.T, 0.0), hyper), rel=1e-12
        )


class TestLogJoint:
    def test_decomposition_identity(self, rng, small_net):
        latent = LatentConfiguration(rng.standard_normal((4, 2, 2)), beta=0.7)
        hyper = Hyperparameters(sigma2=0.5, tau2=0.3, xi=-1.0, psi2=2.0)
        total = log_joint(small_net, latent, hyper)
        parts = (
            log_likelihood(small_net, latent)
            + log_prior_latent(latent, hyper)
            + beta_prior_logpdf(latent.beta, hyper)
        )
        assert total == pytest.approx(parts, rel=1e-12)

    def test_single_node_prior_only(self, rng):
        net = DynamicNetwork(n=1, T=2, edges=(frozenset(), frozenset()))
        latent = LatentConfiguration(rng.standard_normal((1, 2, 2)), beta=0.2)
        hyper = Hyperparameters()
        assert log_joint(net, latent, hyper) == pytest.approx(
            log_prior_latent(latent, hyper) + beta_prior_logpdf(0.2, hyper)
        )


@settings(max_examples=25, deadline=None)
@given(
    beta=st.floats(-4, 4),
    dx=st.floats(-2, 2),
    dy=st.floats(-2, 2),
)
def test_link_probability_in_unit_interval(beta, dx, dy):
    p = link_probability(beta, np.array([dx, dy]), np.zeros(2))
    assert 0.0 < p < 1.0

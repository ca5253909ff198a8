import math

import numpy as np
import pytest
from scipy import integrate, stats

from pyncorm.datamodel import LevyMeasureSpec
from pyncorm.errors import NumericalError
from pyncorm.levy import (
    bound_density_unnorm,
    bound_normalizer,
    check_dominance,
    gamma_integral,
    high_piece_mass,
    levy_density,
    low_piece_mass,
    sample_allocated_jump,
    sample_bound_density,
    sample_jump_given_scores,
    sample_jumps_above,
    tail_mass,
)
from pyncorm.levy.utils import rejection_sample

GAMMA = LevyMeasureSpec(family="Gamma")
GG_HALF = LevyMeasureSpec(family="GeneralizedGamma", sigma=0.5)

ALL_SPECS = [
    LevyMeasureSpec(family="GeneralizedGamma", sigma=0.1),
    GG_HALF,
    GAMMA,
    LevyMeasureSpec(family="StableBeta", sigma=0.1, gamma_shape=1.0),
    LevyMeasureSpec(family="StableBeta", sigma=0.5, gamma_shape=1.0),
    LevyMeasureSpec(family="Beta", gamma_shape=1.0),
    LevyMeasureSpec(family="Beta", gamma_shape=2.0),
]
SPEC_IDS = ["gg0.1", "gg0.5", "gamma", "sb0.1", "sb0.5", "beta1", "beta2"]


def quad_tail(spec: LevyMeasureSpec, t: float) -> float:
    """Adaptive quadrature of the Lévy density on (t, upper)."""
    upper = spec.upper
    value, _ = integrate.quad(lambda z: levy_density(spec, z), t, upper, epsabs=0, epsrel=1e-11, limit=200)
    return value


class TestLevyMeasureSpec:

    def test_lambda_alias(self):
        # Test that config files may write `lambda`
        spec = LevyMeasureSpec.model_validate({"family": "GeneralizedGamma", "sigma": 0.5, "lambda": 2.0})
        assert spec.lam == 2.0

    def test_stable_process_rejected(self):
        # Test that lambda = 0 is refused (infinite tail mass)
        with pytest.raises(ValueError, match="stable process"):
            LevyMeasureSpec(family="GeneralizedGamma", sigma=0.5, lam=0.0)

    def test_gamma_family_constraints(self):
        # Test the sigma = 0, lambda = 1 constraint of the limit families
        with pytest.raises(ValueError, match="sigma = 0 and lambda = 1"):
            LevyMeasureSpec(family="Gamma", sigma=0.2)
        with pytest.raises(ValueError, match="sigma = 0 and lambda = 1"):
            LevyMeasureSpec(family="Beta", lam=2.0)

    def test_beta_breakpoint_inside_support(self):
        # Test that b must lie below 1 / lambda for the Beta families
        with pytest.raises(ValueError, match="inside the support"):
            LevyMeasureSpec(family="StableBeta", sigma=0.5, lam=2.0, b=0.6)

    def test_free_parameters(self):
        # Test which parameters the xi update may move
        assert GAMMA.free_parameters() == {}
        assert GG_HALF.free_parameters() == {"sigma": 0.5}
        assert set(ALL_SPECS[3].free_parameters()) == {"sigma", "gamma_shape"}

    def test_upper(self):
        # Test the upper end of the support
        assert GAMMA.upper == math.inf
        assert LevyMeasureSpec(family="StableBeta", sigma=0.5, lam=2.0, b=0.3).upper == 0.5


class TestLevyDensity:

    def test_gamma_at_one(self):
        # Test nu(1) = e^-1 for the gamma process
        assert levy_density(GAMMA, 1.0) == pytest.approx(math.exp(-1), rel=1e-10)

    def test_generalized_gamma_at_one(self):
        # Test nu(1) = e^-1 / Gamma(1/2)
        assert levy_density(GG_HALF, 1.0) == pytest.approx(math.exp(-1) / math.sqrt(math.pi), rel=1e-12)
        assert levy_density(GG_HALF, 1.0) == pytest.approx(0.207554, rel=1e-5)

    def test_outside_support(self):
        # Test that a stable-Beta jump above 1 / lambda is a domain error
        spec = LevyMeasureSpec(family="StableBeta", sigma=0.5, gamma_shape=1.0)
        with pytest.raises(ValueError, match="must lie in"):
            levy_density(spec, 1.5)
        with pytest.raises(ValueError):
            levy_density(GAMMA, 0.0)

    def test_vectorized(self):
        # Test that arrays keep their shape
        z = np.array([[0.5, 1.0], [2.0, 3.0]])
        out = levy_density(GAMMA, z)
        assert out.shape == z.shape
        np.testing.assert_allclose(out, np.exp(-z) / z)


class TestTailMass:

    def test_gamma_at_one(self):
        # Test T(1) = E1(1)
        assert tail_mass(GAMMA, 1.0) == pytest.approx(0.219384, rel=1e-5)

    def test_vanishes(self):
        # Test that the tail mass goes to zero far out
        assert tail_mass(GAMMA, 60.0) < 1e-25
        assert tail_mass(GG_HALF, 60.0) < 1e-25
        assert tail_mass(LevyMeasureSpec(family="Beta", gamma_shape=2.0), 0.999999) < 1e-10

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=SPEC_IDS)
    @pytest.mark.parametrize("t", [0.01, 0.3, 0.65, 0.9])
    def test_matches_quadrature(self, spec, t):
        # Test the special-function representation against quadrature
        assert tail_mass(spec, t) == pytest.approx(quad_tail(spec, t), rel=1e-7)

    def test_nonpositive_threshold(self):
        # Test that t <= 0 is rejected
        with pytest.raises(ValueError):
            tail_mass(GAMMA, 0.0)


class TestBoundDensity:

    def test_gamma_low_piece(self):
        # Test kappa~(0.5) = -log 0.5 for the gamma process
        assert bound_density_unnorm(GAMMA, 0.5) == pytest.approx(0.693147, rel=1e-6)

    def test_generalized_gamma_at_breakpoint(self):
        # Test kappa~(b) = (b^-1/2 - 1) / (Gamma(1/2) / 2)
        assert bound_density_unnorm(GG_HALF, 0.65) == pytest.approx(0.271204, rel=1e-5)

    def test_gamma_high_piece(self):
        # Test kappa~(2) = -log(b) exp(-(2 - b))
        expected = -math.log(0.65) * math.exp(-(2 - 0.65))
        assert bound_density_unnorm(GAMMA, 2.0) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=SPEC_IDS)
    def test_dominates_tail_mass(self, spec):
        # Test kappa~(t) >= T(t) on a log grid over the support
        upper = 50.0 if spec.upper == math.inf else spec.upper * (1 - 1e-6)
        t = np.geomspace(1e-6, upper, 1000)
        bound = bound_density_unnorm(spec, t)
        tail = tail_mass(spec, t)
        assert np.all(bound >= tail * (1 - 1e-9))
        assert check_dominance(spec)

    def test_limit_continuity(self):
        # Test that the generalized gamma bound tends to the gamma bound as sigma -> 0
        near = LevyMeasureSpec(family="GeneralizedGamma", sigma=1e-6)
        t = np.geomspace(1e-4, 20, 200)
        np.testing.assert_allclose(bound_density_unnorm(near, t), bound_density_unnorm(GAMMA, t), atol=1e-3)

    def test_breakpoint_that_fails_is_rejected(self):
        # Test that a spec whose bound does not dominate cannot be built
        with pytest.raises(ValueError, match="does not dominate"):
            LevyMeasureSpec(family="GeneralizedGamma", sigma=0.5, b=0.999)


class TestBoundNormalizer:

    def test_gamma_value(self):
        # Test D = b - b log b - log b at b = 0.65
        assert bound_normalizer(GAMMA) == pytest.approx(1.360792, rel=1e-6)

    def test_generalized_gamma_formula(self):
        # Test the generalized gamma D at lambda = 1
        b = 0.65
        expected = (b**0.5 / 0.5 - b + b**-0.5 - 1) / (0.5 * math.gamma(0.5))
        assert bound_normalizer(GG_HALF) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=SPEC_IDS)
    def test_matches_quadrature(self, spec):
        # Test each piece mass against quadrature of the bound
        f = lambda t: bound_density_unnorm(spec, t)
        low, _ = integrate.quad(f, 0, spec.b, epsabs=0, epsrel=1e-12, limit=200)
        high, _ = integrate.quad(f, spec.b, spec.upper, epsabs=0, epsrel=1e-12, limit=200)
        assert low_piece_mass(spec) == pytest.approx(low, rel=1e-8)
        assert high_piece_mass(spec) == pytest.approx(high, rel=1e-8)
        assert bound_normalizer(spec) == pytest.approx(low + high, rel=1e-8)


class TestSampleBoundDensity:

    @staticmethod
    def gamma_cdf(t: np.ndarray) -> np.ndarray:
        b = 0.65
        low = np.where(t < b, t - t * np.log(t), b - b * math.log(b))
        high = np.where(t < b, 0.0, -math.log(b) * -np.expm1(-(t - b)))
        return (low + high) / bound_normalizer(GAMMA)

    def test_gamma_cdf_oracle(self):
        # Test the closed-form CDF used below against quadrature
        for t in (0.1, 0.65, 3.0):
            value, _ = integrate.quad(lambda s: bound_density_unnorm(GAMMA, s), 0, t, limit=200)
            assert self.gamma_cdf(np.array(t)) == pytest.approx(value / bound_normalizer(GAMMA), rel=1e-8)

    def test_gamma_goodness_of_fit(self):
        # Test draws against kappa~ / D with a Kolmogorov-Smirnov distance
        draws = sample_bound_density(GAMMA, np.random.default_rng(1), size=100_000)
        assert stats.kstest(draws, self.gamma_cdf).statistic < 0.01

    def test_generalized_gamma_piece_fraction(self):
        # Test the share of draws below b against the analytic piece mass
        n = 100_000
        draws = sample_bound_density(GG_HALF, np.random.default_rng(2), size=n)
        p = low_piece_mass(GG_HALF) / bound_normalizer(GG_HALF)
        assert np.all(draws > 0)
        assert abs(np.mean(draws < 0.65) - p) < 3 * math.sqrt(p * (1 - p) / n)

    @pytest.mark.parametrize("spec", ALL_SPECS[3:], ids=SPEC_IDS[3:])
    def test_beta_draws_inside_support(self, spec):
        # Test that Beta-family draws stay in (0, 1 / lambda)
        draws = sample_bound_density(spec, np.random.default_rng(3), size=10_000)
        assert np.all((draws > 0) & (draws < spec.upper))

    def test_determinism(self):
        # Test that equal seeds give equal sequences
        first = sample_bound_density(GAMMA, np.random.default_rng(7), size=50)
        second = sample_bound_density(GAMMA, np.random.default_rng(7), size=50)
        np.testing.assert_array_equal(first, second)

    def test_scalar_draw(self):
        # Test that size=None returns a float
        assert isinstance(sample_bound_density(GAMMA, np.random.default_rng(0)), float)


class TestGammaIntegral:

    def test_generalized_gamma_closed_form(self):
        # Test (lambda + V)^(sigma - 1) at V = 3
        assert gamma_integral(GG_HALF, 3.0) == pytest.approx(0.5, rel=1e-12)

    def test_gamma_at_zero(self):
        # Test that the integral of z nu(z) is one
        assert gamma_integral(GAMMA, 0.0) == pytest.approx(1.0)

    def test_beta_against_quadrature(self):
        # Test the Beta process (nu(z) = 1/z on (0, 1)) at V = 2
        spec = LevyMeasureSpec(family="Beta", gamma_shape=1.0)
        value, _ = integrate.quad(lambda z: z * math.exp(-2 * z) * levy_density(spec, z), 0, 1)
        assert gamma_integral(spec, 2.0) == pytest.approx(value, rel=1e-8)
        assert gamma_integral(spec, 2.0) == pytest.approx((1 - math.exp(-2)) / 2, rel=1e-8)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=SPEC_IDS)
    def test_matches_quadrature(self, spec):
        # Test every family at V = 0.7
        integrand = lambda z: z * math.exp(-0.7 * z) * levy_density(spec, z)
        value, _ = integrate.quad(integrand, 0, spec.upper, epsabs=0, epsrel=1e-11, limit=200)
        assert gamma_integral(spec, 0.7) == pytest.approx(value, rel=1e-8)

    def test_negative_V(self):
        # Test that V < 0 is rejected
        with pytest.raises(ValueError):
            gamma_integral(GAMMA, -1.0)


class TestJumpSamplers:

    def test_jump_given_scores_conjugate_mean(self):
        # Test E[J | m] = (1 - sigma) / (lambda + V) = 0.125
        rng = np.random.default_rng(11)
        draws = np.array([sample_jump_given_scores(GG_HALF, 3.0, rng) for _ in range(100_000)])
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - 0.125) < 3 * se

    def test_jump_given_scores_gamma_at_zero(self):
        # Test that V = 0 gives a Gamma(1, 1) jump
        rng = np.random.default_rng(12)
        draws = np.array([sample_jump_given_scores(GAMMA, 0.0, rng) for _ in range(20_000)])
        assert draws.mean() == pytest.approx(1.0, abs=4 * 1 / math.sqrt(draws.size))

    @pytest.mark.parametrize("V", [0.5, 4.0])
    def test_jump_given_scores_beta_mean(self, V):
        # Test the rejection sampler of the Beta families against quadrature moments
        spec = LevyMeasureSpec(family="StableBeta", sigma=0.5, gamma_shape=1.0)
        weight = lambda z: z * math.exp(-V * z) * levy_density(spec, z)
        norm, _ = integrate.quad(weight, 0, 1)
        mean, _ = integrate.quad(lambda z: z * weight(z), 0, 1)
        rng = np.random.default_rng(13)
        draws = np.array([sample_jump_given_scores(spec, V, rng) for _ in range(20_000)])
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert np.all((draws > 0) & (draws < 1))
        assert abs(draws.mean() - mean / norm) < 3 * se

    def test_jump_given_scores_determinism(self):
        # Test that equal seeds give equal draws
        first = sample_jump_given_scores(GG_HALF, 1.0, np.random.default_rng(5))
        second = sample_jump_given_scores(GG_HALF, 1.0, np.random.default_rng(5))
        assert first == second

    def test_allocated_jump_conjugate_mean(self):
        # Test the Gamma(n_k - sigma, lambda + V) update: mean 1.5 / 2
        rng = np.random.default_rng(21)
        draws = np.array([sample_allocated_jump(GG_HALF, 2, 1.0, rng) for _ in range(100_000)])
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - 0.75) < 3 * se

    def test_allocated_jump_gamma(self):
        # Test that n_k = 1, V = 0 gives a Gamma(1, 1) jump
        rng = np.random.default_rng(22)
        draws = np.array([sample_allocated_jump(GAMMA, 1, 0.0, rng) for _ in range(20_000)])
        assert draws.mean() == pytest.approx(1.0, abs=4 / math.sqrt(draws.size))

    def test_allocated_jump_needs_allocation(self):
        # Test that n_k = 0 is a contract violation
        with pytest.raises(ValueError, match="n_k >= 1"):
            sample_allocated_jump(GAMMA, 0, 1.0, np.random.default_rng(0))

    @pytest.mark.slow
    def test_allocated_jump_beta_stationary(self):
        # Test that the Metropolis step leaves J^3 e^(-J/2) nu(J) invariant
        spec = LevyMeasureSpec(family="Beta", gamma_shape=2.0)
        target = lambda z: z**3 * math.exp(-0.5 * z) * levy_density(spec, z)
        norm, _ = integrate.quad(target, 0, 1)
        mean, _ = integrate.quad(lambda z: z * target(z), 0, 1)

        rng = np.random.default_rng(23)
        value, chain = 0.5, np.empty(200_000)
        for t in range(chain.size):
            value = sample_allocated_jump(spec, 3, 0.5, rng, current=value, step=0.8)
            chain[t] = value
        # Batch means for the autocorrelated chain
        batches = chain.reshape(100, -1).mean(axis=1)
        se = batches.std(ddof=1) / math.sqrt(batches.size)
        assert abs(chain.mean() - mean / norm) < 3 * se


class TestSampleJumpsAbove:

    @pytest.mark.parametrize("spec", [GAMMA, GG_HALF, ALL_SPECS[4]], ids=["gamma", "gg0.5", "sb0.5"])
    def test_count_matches_tail_mass(self, spec):
        # Test that the number of jumps above t is Poisson(M T(t))
        rng = np.random.default_rng(31)
        mass, threshold = 2.0, 0.05
        counts = np.array([sample_jumps_above(spec, mass, threshold, rng).size for _ in range(4000)])
        expected = mass * tail_mass(spec, threshold)
        assert abs(counts.mean() - expected) < 4 * math.sqrt(expected / counts.size)

    def test_jumps_above_threshold(self):
        # Test that every simulated jump exceeds the threshold
        jumps = sample_jumps_above(GG_HALF, 1.0, 0.01, np.random.default_rng(32))
        assert np.all(jumps > 0.01)

    def test_invalid_threshold(self):
        # Test that the threshold must be positive
        with pytest.raises(ValueError):
            sample_jumps_above(GAMMA, 1.0, 0.0, np.random.default_rng(0))


class TestRejectionSample:

    def test_exhaustion(self):
        # Test that a sampler that never accepts raises instead of hanging
        with pytest.raises(NumericalError):
            rejection_sample(propose=lambda m: np.zeros(m), accept=lambda cand: cand > 1, size=1)

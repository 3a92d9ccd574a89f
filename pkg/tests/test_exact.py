"""Finite-size closed forms: covariance, quadratic form, fusion statistic, tails.

The quadratic form is cross-checked against a dense np.linalg.solve oracle,
which shares no code path with the Cholesky route used by the library.
"""

import numpy as np
import pytest

from cdmafusion import (
    ChannelModel,
    DetectorSpec,
    DimensionMismatch,
    NumericalFailure,
    SystemParams,
    channel_covariance,
    exact_performance,
    fusion_statistic,
    quadratic_form,
)
from cdmafusion.spreading import generate, load


def make_params(**kw) -> SystemParams:
    base = dict(N=16, Ns=16, P=10.0, m=1.0, sigma_v2=1.0, sigma_w2=1.0, p0=0.5, p1=0.5)
    base.update(kw)
    return SystemParams(**base)


def model_for(params: SystemParams, seed: int = 0) -> ChannelModel:
    return ChannelModel.from_params(params, generate(params.N, params.Ns, seed=seed))


def qf_oracle(model: ChannelModel) -> float:
    """Dense-solve route for the quadratic form."""
    cov = channel_covariance(model)
    s1 = model.S.entries.sum(axis=1)
    return float(s1 @ np.linalg.solve(cov, s1))


class TestChannelModel:
    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            ChannelModel.from_params(make_params(N=16, Ns=8), generate(16, 4, seed=0))
        with pytest.raises(DimensionMismatch):
            ChannelModel.from_params(make_params(N=16, Ns=8), generate(8, 8, seed=0))

    def test_carries_gain(self):
        p = make_params(N=4, Ns=2, P=8.0, m=1.0, sigma_v2=1.0)
        mdl = model_for(p)
        # Ns g^2 (m^2 + sigma_v2) = P  =>  g = sqrt(8 / (2 * 2)) = sqrt(2)
        assert mdl.g == pytest.approx(np.sqrt(2.0), rel=1e-15)


class TestChannelCovariance:
    def test_exactly_symmetric(self):
        cov = channel_covariance(model_for(make_params(N=24, Ns=31), seed=3))
        assert np.array_equal(cov, cov.T)

    def test_positive_definite_floor(self):
        for seed in (0, 1, 2):
            p = make_params(N=12, Ns=40, sigma_v2=2.5, sigma_w2=0.3)
            cov = channel_covariance(model_for(p, seed=seed))
            assert np.linalg.eigvalsh(cov).min() >= p.sigma_w2 - 1e-12

    def test_noiseless_sensors_give_diagonal(self):
        p = make_params(N=8, Ns=8, sigma_v2=0.0, sigma_w2=0.7)
        cov = channel_covariance(model_for(p))
        assert np.array_equal(cov, 0.7 * np.eye(8))

    def test_scalar_case_closed_form(self):
        # N=1, Ns=1, S=[[1]]: Sigma = [[g^2 sigma_v2 + sigma_w2]]
        p = make_params(N=1, Ns=1, P=4.0, sigma_v2=1.0, sigma_w2=0.5)
        mdl = ChannelModel.from_params(p, load(np.array([[1.0]])))
        cov = channel_covariance(mdl)
        assert cov.shape == (1, 1)
        assert cov[0, 0] == pytest.approx(mdl.g**2 + 0.5, rel=1e-14)


class TestQuadraticForm:
    @pytest.mark.parametrize("N,Ns,seed", [(4, 2, 0), (16, 16, 1), (32, 9, 2), (8, 40, 3), (64, 64, 4)])
    def test_against_dense_solve(self, N, Ns, seed):
        mdl = model_for(make_params(N=N, Ns=Ns, sigma_v2=1.3, sigma_w2=0.8), seed=seed)
        assert quadratic_form(mdl) == pytest.approx(qf_oracle(mdl), rel=1e-10)

    def test_nonnegative(self):
        for seed in range(8):
            assert quadratic_form(model_for(make_params(N=8, Ns=8), seed=seed)) >= 0.0

    def test_zero_when_columns_cancel(self):
        p = make_params(N=1, Ns=2, P=1.0)
        mdl = ChannelModel.from_params(p, load(np.array([[1.0, -1.0]])))
        assert quadratic_form(mdl) == 0.0

    def test_rejects_indefinite_covariance(self):
        mdl = ChannelModel(S=generate(4, 4, seed=0), g=1.0, sigma_v2=1.0, sigma_w2=-10.0, m=1.0)
        with pytest.raises(NumericalFailure):
            quadratic_form(mdl)


class TestFusionStatistic:
    def test_linearity(self):
        mdl = model_for(make_params(N=12, Ns=10), seed=5)
        rng = np.random.default_rng(8)
        r1 = rng.normal(size=12)
        r2 = rng.normal(size=12)
        lhs = fusion_statistic(mdl, 0.7 * r1 - 1.9 * r2)
        rhs = 0.7 * fusion_statistic(mdl, r1) - 1.9 * fusion_statistic(mdl, r2)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)

    def test_at_mean_equals_twice_shift(self):
        # T evaluated at the H1 mean g m S 1 equals 2 g^2 m^2 qf
        mdl = model_for(make_params(N=16, Ns=12, m=1.7), seed=6)
        s1 = mdl.S.entries.sum(axis=1)
        mean = mdl.g * mdl.m * s1
        expected = 2.0 * mdl.g**2 * mdl.m**2 * quadratic_form(mdl)
        assert fusion_statistic(mdl, mean) == pytest.approx(expected, rel=1e-10)

    def test_shape_check(self):
        mdl = model_for(make_params(N=16, Ns=12))
        with pytest.raises(DimensionMismatch):
            fusion_statistic(mdl, np.zeros(15))
        with pytest.raises(DimensionMismatch):
            fusion_statistic(mdl, np.zeros((16, 1)))


class TestExactPerformance:
    def test_report_fields(self):
        p = make_params()
        rep = exact_performance(p, generate(16, 16, seed=0), DetectorSpec())
        assert rep.method == "exact"
        assert rep.mc is None
        assert rep.tau_prime == 0.0
        assert 0.0 < rep.pf < 0.5 and 0.0 < rep.pm < 0.5

    def test_pe_is_prior_mix(self):
        p = make_params(p0=0.3, p1=0.7)
        rep = exact_performance(p, generate(16, 16, seed=1), DetectorSpec())
        assert rep.pe == p.p0 * rep.pf + p.p1 * rep.pm

    def test_symmetric_at_zero_threshold(self):
        rep = exact_performance(
            make_params(), generate(16, 16, seed=2), DetectorSpec(criterion="fixed", tau_prime=0.0)
        )
        assert rep.pf == rep.pm

    def test_monotone_in_threshold(self):
        p = make_params()
        S = generate(16, 16, seed=3)
        taus = np.linspace(-3.0, 3.0, 13)
        reps = [exact_performance(p, S, DetectorSpec(criterion="fixed", tau_prime=float(t))) for t in taus]
        pfs = [r.pf for r in reps]
        pms = [r.pm for r in reps]
        assert all(b <= a for a, b in zip(pfs, pfs[1:]))
        assert all(a <= b for a, b in zip(pms, pms[1:]))

    def test_np_pins_false_alarm(self):
        p = make_params(N=32, Ns=24)
        for alpha_fa in (0.01, 0.05, 0.2):
            rep = exact_performance(p, generate(32, 24, seed=4), DetectorSpec(criterion="np", alpha_fa=alpha_fa))
            assert rep.pf == pytest.approx(alpha_fa, abs=1e-9)

    def test_degenerate_cancelling_signatures(self):
        p = make_params(N=1, Ns=2, P=1.0)
        S = load(np.array([[1.0, -1.0]]))
        at_zero = exact_performance(p, S, DetectorSpec(criterion="fixed", tau_prime=0.0))
        assert (at_zero.pf, at_zero.pm) == (1.0, 0.0)
        above = exact_performance(p, S, DetectorSpec(criterion="fixed", tau_prime=0.5))
        assert (above.pf, above.pm) == (0.0, 1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            exact_performance(make_params(N=16, Ns=16), generate(16, 8, seed=0), DetectorSpec())

    def test_better_channel_helps(self):
        # more transmit power strictly reduces the balanced error probability
        S = generate(16, 16, seed=7)
        pes = [
            exact_performance(make_params(P=P), S, DetectorSpec()).pe
            for P in (1.0, 4.0, 16.0, 64.0)
        ]
        assert all(b < a for a, b in zip(pes, pes[1:]))

"""Tests for the Monte Carlo channel simulator."""

import math

import numpy as np
import pytest
from scipy import stats

from cipc import analytic as an
from cipc import fbl
from cipc import montecarlo as mc
from cipc.analytic import SystemParams
from cipc.errors import DomainError

FIG2 = SystemParams(nt=4, phi=0.9, T=100, R=0.8, pmax=10 ** 2.3, q=20.0)
SEED = 0


class TestStreams:
    def test_channel_moments(self):
        x, y = mc.draw_channels(SEED, 0, 1_000_000, 4)
        assert abs(x.mean() - 4.0) <= 0.01
        assert abs(y.mean() - 1.0) <= 0.01
        assert abs(np.corrcoef(x, y)[0, 1]) <= 0.005

    def test_marginal_laws(self):
        x, y = mc.draw_channels(SEED, 0, 200_000, 3)
        assert stats.kstest(x, stats.gamma(3).cdf).pvalue > 1e-3
        assert stats.kstest(y, stats.expon().cdf).pvalue > 1e-3

    def test_trial_indexing(self):
        x, y = mc.draw_channels(7, 12340, 10, 4)
        d = mc.draw_channel(mc.trial_generator(7, 12345, 4), 4)
        assert d.x == pytest.approx(x[5], rel=1e-15)
        assert d.y == pytest.approx(y[5], rel=1e-14)

    def test_split_ranges_agree(self):
        whole = mc.draw_channels(3, 100, 50, 8)
        a = mc.draw_channels(3, 100, 20, 8)
        b = mc.draw_channels(3, 120, 30, 8)
        np.testing.assert_array_equal(whole[0], np.concatenate([a[0], b[0]]))
        np.testing.assert_array_equal(whole[1], np.concatenate([a[1], b[1]]))

    def test_distinct_seeds(self):
        assert not np.array_equal(mc.draw_channels(1, 0, 10, 4)[0], mc.draw_channels(2, 0, 10, 4)[0])

    def test_bad_nt(self):
        with pytest.raises(DomainError):
            mc.draw_channel(mc.trial_generator(0, 0, 1), 0)


class TestRealizedSinr:
    def test_perfect(self):
        p = FIG2.replace(phi=1.0, q=7.0)
        np.testing.assert_array_equal(mc.realized_sinr(np.array([1.0, 3.0]), np.array([0.2, 9.0]), p),
                                      [7.0, 7.0])

    def test_ceiling(self):
        assert mc.realized_sinr(2.0, 0.0, FIG2) == pytest.approx(an.sinr_ceiling(FIG2), rel=1e-15)

    def test_arithmetic(self):
        p = FIG2.replace(q=10.0)
        assert mc.realized_sinr(3.0, 3.0, p) == pytest.approx(4.5, rel=1e-15)


class TestSimulate:
    def test_degenerate_perfect(self):
        p = FIG2.replace(phi=1.0, pmax=math.inf, q=2.0)
        est = mc.simulate_packet_loss(p, 100_000, SEED)
        assert est.stderr == 0.0
        assert est.p_loss_hat == fbl.decode_error_exact(2.0, p.R, p.T)
        assert est.eps_cond_hat == est.p_loss_hat

    def test_always_suspended(self):
        p = FIG2.replace(q=100.0 * FIG2.pmax * FIG2.nt)
        est = mc.simulate_packet_loss(p, 10_000, SEED)
        assert est.p_t_hat == 0.0
        assert est.p_loss_hat == 1.0
        assert math.isnan(est.eps_cond_hat)

    def test_fig2_q20_vs_analytic(self):
        est = mc.simulate_packet_loss(FIG2, 1_000_000, SEED)
        assert abs(est.p_loss_hat - an.packet_loss_truncated(FIG2).p_loss) <= 3.0 * est.stderr

    def test_transmission_fraction(self):
        p = FIG2.replace(q=600.0)
        est = mc.simulate_packet_loss(p, 200_000, SEED)
        pt = an.transmission_prob(p)
        assert abs(est.p_t_hat - pt) <= 4.0 * math.sqrt(pt * (1 - pt) / est.n_trials)

    def test_reproducible(self):
        a = mc.simulate_packet_loss(FIG2, 100_000, 11)
        b = mc.simulate_packet_loss(FIG2, 100_000, 11)
        assert a == b

    def test_worker_count_invariant(self):
        a = mc.simulate_packet_loss(FIG2, 150_000, 5, workers=1)
        b = mc.simulate_packet_loss(FIG2, 150_000, 5, workers=2)
        assert a == b

    def test_stderr_scaling(self):
        a = mc.simulate_packet_loss(FIG2.replace(q=5.0), 100_000, SEED)
        b = mc.simulate_packet_loss(FIG2.replace(q=5.0), 400_000, SEED)
        assert b.stderr == pytest.approx(a.stderr / 2.0, rel=0.2)

    def test_breakdown_consistent(self):
        est = mc.simulate_packet_loss(FIG2.replace(q=300.0), 100_000, SEED)
        assert est.p_loss_hat == pytest.approx(est.eps_cond_hat * est.p_t_hat + 1 - est.p_t_hat,
                                               rel=1e-12)

    @pytest.mark.parametrize("kw", [dict(n_trials=0), dict(kernel="bogus"), dict(seed=-1)])
    def test_domain(self, kw):
        with pytest.raises(DomainError):
            mc.simulate_packet_loss(FIG2, **kw)


class TestEmpiricalCdf:
    def test_deciles(self):
        p = FIG2.replace(q=10.0)
        n = 1_000_000
        est = mc.simulate_packet_loss(p, n, SEED)
        pts = np.linspace(0.5, 8.5, 9)
        emp = mc.empirical_sinr_cdf(p, pts, n, SEED)
        ref = np.array([an.cond_sinr_cdf(g, p) for g in pts])
        assert np.all(np.abs(emp - ref) <= 3.0 * np.sqrt(ref * (1 - ref) / est.n_transmit) + 1e-12)

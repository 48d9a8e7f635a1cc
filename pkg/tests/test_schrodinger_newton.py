import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate

from contextlab.contextuality import rank_test
from contextlab.errors import ConfigError, GridTooCoarse, NonPositiveVariance, ValidationError
from contextlab.maps import SNConfig, default_sn_config, sn_channel, sn_moment_evolution
from contextlab.maps.schrodinger_newton import (
    EPS_SN_CONV,
    _integrate_branch,
    branch_paths,
    free_variance,
    loop_pulse,
    self_potential,
)
from contextlab.qstate import BlochState, StateSet


@pytest.fixture(scope="module")
def cfg():
    return default_sn_config()


@pytest.fixture(scope="module")
def cfg_free():
    return default_sn_config(G_N=0.0)


def smeared_by_quad(cfg, z, var, order):
    # dimensionless: lengths in units of R, kernel derivative orders rescaled afterwards
    sd, zr = math.sqrt(var) / cfg.R, z / cfg.R
    kernels = [
        lambda d: -1.0 / math.sqrt(d * d + 1.0),
        lambda d: d / (d * d + 1.0) ** 1.5,
        lambda d: (1.0 - 2 * d * d) / (d * d + 1.0) ** 2.5,
    ]
    dens = lambda x: math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    val, _ = integrate.quad(lambda x: dens(x) * kernels[order](zr - sd * x), -40, 40,
                            points=[zr / sd], limit=400, epsabs=1e-15, epsrel=1e-13)
    return val * cfg.G_N * cfg.mass**2 / cfg.R ** (order + 1)


class TestSelfPotential:
    @pytest.mark.parametrize("z", [0.0, 3e-8, 1e-7, 4e-7, 1e-6, -2.5e-7])
    def test_against_quadrature(self, cfg, z):
        var = cfg.A0
        got = self_potential(cfg, np.array([z]), np.array([var]))[:, 0]
        for order in range(3):
            expect = smeared_by_quad(cfg, z, var, order)
            scale = cfg.G_N * cfg.mass**2 / cfg.R ** (order + 1)
            assert abs(got[order] - expect) < 1e-11 * scale

    def test_even_in_z(self, cfg):
        z = np.array([2e-7, -2e-7])
        u = self_potential(cfg, z, np.full(2, cfg.A0))
        assert u[0, 0] == pytest.approx(u[0, 1], rel=1e-13)
        assert u[1, 0] == pytest.approx(-u[1, 1], rel=1e-13)


class TestPaths:
    def test_loop_pulse_closed_form(self, cfg):
        t = np.array([0.125, 0.25, 0.5, 0.75, 1.0])
        u_up, u_down = branch_paths(cfg, t)
        a = 8e-6  # separation 1e-6 reached with a (T/4)^2 * 2 per branch
        np.testing.assert_allclose(u_up, [a * 0.125**2 / 2, a * 0.25**2 / 2, a * 0.25**2, a * 0.25**2 / 2, 0.0],
                                   atol=1e-20)
        np.testing.assert_allclose(u_down, -u_up, atol=1e-20)

    def test_pulse_validation(self):
        with pytest.raises(ConfigError):
            loop_pulse(1e-17, 1e-6, 1.0, 0.3)


class TestFreeEvolution:
    def test_gouy_phase(self, cfg_free):
        res = sn_moment_evolution(cfg_free, 0.5)
        t = res.times
        m, hbar, a0 = cfg_free.mass, cfg_free.hbar, cfg_free.A0
        np.testing.assert_allclose(res.A_up, a0 * (1 + (hbar * t / (2 * m * a0)) ** 2), rtol=1e-12)
        expect = -0.5 * np.arctan(hbar * t / (2 * m * a0))
        np.testing.assert_allclose(res.phi_up, expect, atol=1e-12)
        np.testing.assert_array_equal(res.phi_up, res.phi_down)
        assert np.all(res.z_up == 0) and np.all(res.p_up == 0)

    def test_no_delta_dependence(self, cfg_free):
        rel = [sn_moment_evolution(cfg_free, a2).relative_phase for a2 in (0.0, 0.3, 0.7, 1.0)]
        for r in rel[1:]:
            assert np.max(np.abs(r - rel[0])) < 1e-12


class TestHarmonicMoments:
    def test_width_oscillation(self):
        # constant curvature k: exact squeezed-state width A0 cos^2 + hbar^2/(4 A0 m^2 w^2) sin^2
        m, hbar, a0, k = 1.0, 1.0, 0.3, 4.0
        w = math.sqrt(k / m)
        times = np.linspace(0, 3, 3001)
        cfg = SNConfig(mass=m, hbar=hbar, G_N=0.0, R=1.0, A0=a0, times=times,
                       F_up=np.zeros_like(times), F_down=np.zeros_like(times))
        coeff = np.zeros((3, len(times)))
        coeff[1] = 0.2
        coeff[2] = k
        ys = _integrate_branch(cfg, coeff, coeff[:, :-1], "test")
        expect_a = a0 * np.cos(w * times) ** 2 + hbar**2 / (4 * a0 * m**2 * w**2) * np.sin(w * times) ** 2
        np.testing.assert_allclose(ys[:, 2], expect_a, atol=1e-10)
        # mean follows the shifted classical oscillator about z = -0.2 / k
        np.testing.assert_allclose(ys[:, 0], -0.2 / k * (1 - np.cos(w * times)), atol=1e-10)


class TestGravity:
    def test_relative_phase_matches_quadrature(self, cfg):
        # oracle: relative phase = delta * int (U(0) - U(du(t))) dt / hbar, the <z> terms being ~1e-15 rad
        def integrand(t):
            u_up, u_down = branch_paths(cfg, np.array([t]))
            du = float(u_up[0] - u_down[0])
            var = float(free_variance(cfg, np.array([t]))[0])
            return smeared_by_quad(cfg, 0.0, var, 0) - smeared_by_quad(cfg, du, var, 0)

        total, _ = integrate.quad(integrand, 0.0, 1.0, points=[0.25, 0.5, 0.75], epsrel=1e-10, limit=200)
        for a2 in (0.25, 0.75):
            delta = 2 * a2 - 1
            res = sn_moment_evolution(cfg, a2)
            assert res.relative_phase[-1] == pytest.approx(delta * total / cfg.hbar, rel=1e-5)

    def test_delta_dependence(self, cfg):
        r1 = sn_moment_evolution(cfg, 0.25).relative_phase[-1]
        r2 = sn_moment_evolution(cfg, 0.75).relative_phase[-1]
        assert abs(r1 - r2) > 10 * EPS_SN_CONV

    def test_label_exchange(self, cfg):
        for a2 in (0.1, 0.25, 0.6):
            a = sn_moment_evolution(cfg, a2)
            b = sn_moment_evolution(cfg.swapped(), 1.0 - a2)
            np.testing.assert_allclose(b.phi_up, a.phi_down, atol=1e-9, rtol=0)
            np.testing.assert_allclose(b.phi_down, a.phi_up, atol=1e-9, rtol=0)

    def test_variance_positive(self, cfg):
        res = sn_moment_evolution(cfg, 0.5)
        assert np.all(res.A_up > 0) and np.all(res.A_down > 0)

    def test_convergence_on_refinement(self, cfg):
        coarse = sn_moment_evolution(cfg, 0.3, check_convergence=False)
        fine = sn_moment_evolution(cfg.refined(), 0.3, check_convergence=False)
        assert np.max(np.abs(fine.phi_up[::2] - coarse.phi_up)) < EPS_SN_CONV
        assert np.max(np.abs(fine.phi_down[::2] - coarse.phi_down)) < EPS_SN_CONV

    def test_grid_too_coarse(self, cfg):
        times, f_up, f_down = np.array([0.0, 1.0]), np.array([8e-23, 0.0]), np.array([-8e-23, 0.0])
        coarse = replace(cfg, times=times, F_up=f_up, F_down=f_down)
        with pytest.raises(GridTooCoarse):
            sn_moment_evolution(coarse, 0.25)

    def test_non_positive_variance(self):
        times = np.linspace(0, 10, 3)
        cfg = SNConfig(mass=1.0, hbar=1e-3, G_N=0.0, R=1.0, A0=1.0, B0=-1.0, times=times,
                       F_up=np.zeros(3), F_down=np.zeros(3))
        with pytest.raises(NonPositiveVariance):
            sn_moment_evolution(cfg, 0.5, check_convergence=False)

    def test_alpha2_domain(self, cfg):
        with pytest.raises(ValidationError):
            sn_moment_evolution(cfg, 1.2)


class TestChannel:
    def test_pole_fixed(self, cfg):
        assert sn_channel(BlochState(0.0), cfg) == BlochState(0.0)
        assert sn_channel(BlochState(math.pi / 2), cfg) == BlochState(math.pi / 2)

    def test_free_shift_uniform(self, cfg_free):
        outs = [sn_channel(BlochState(th, 0.4), cfg_free) for th in (0.2, 0.7, 1.3)]
        assert all(o.phi == pytest.approx(outs[0].phi, abs=1e-12) for o in outs)
        thetas = (0.0, math.pi / 6, math.pi / 3, math.pi / 2)
        out = StateSet.from_bloch([sn_channel(BlochState(t), cfg_free) for t in thetas])
        assert rank_test(out).rank == 3

    def test_meridian_becomes_independent(self, cfg):
        thetas = (0.0, math.pi / 6, math.pi / 3, math.pi / 2)
        before = StateSet.from_bloch([BlochState(t) for t in thetas])
        after = StateSet.from_bloch([sn_channel(BlochState(t), cfg) for t in thetas])
        assert rank_test(before).rank == 3
        assert rank_test(after).rank == 4

    def test_off_grid_time(self, cfg):
        with pytest.raises(ValidationError):
            sn_channel(BlochState(0.5), cfg, at_time=0.0005)


class TestConfig:
    def test_json_round_trip(self, cfg):
        again = SNConfig.from_json(cfg.to_json())
        np.testing.assert_array_equal(again.F_up, cfg.F_up)
        assert again.mass == cfg.mass and again.dt == pytest.approx(cfg.dt)

    def test_pulse_shorthand(self, cfg):
        obj = {"mass": 1e-17, "G_N": 6.6743e-11, "R": 1e-7, "A0": 1e-14,
               "pulse": {"separation": 1e-6, "duration": 1.0, "dt": 1e-3}}
        c = SNConfig.from_json(obj)
        np.testing.assert_allclose(c.F_up, cfg.F_up)

    @pytest.mark.parametrize("patch,field", [
        ({"mass": -1.0}, "mass"),
        ({"R": "big"}, "R"),
        ({"G_N": -1.0}, "G_N"),
        ({"bogus": 1}, "bogus"),
    ])
    def test_bad_fields_named(self, cfg, patch, field):
        obj = cfg.to_json()
        obj.update(patch)
        with pytest.raises(ConfigError, match=field):
            SNConfig.from_json(obj)

    def test_non_uniform_grid(self, cfg):
        obj = cfg.to_json()
        obj["times"][5] += 1e-4
        with pytest.raises(ConfigError, match="uniform"):
            SNConfig.from_json(obj)

    def test_misaligned_forces(self, cfg):
        obj = cfg.to_json()
        obj["F_up"] = obj["F_up"][:-1]
        with pytest.raises(ConfigError, match="align"):
            SNConfig.from_json(obj)

    def test_refined_grid(self, cfg):
        fine = cfg.refined()
        assert len(fine.times) == 2 * len(cfg.times) - 1
        assert fine.dt == pytest.approx(cfg.dt / 2)
        u_c = branch_paths(cfg, cfg.times)[0]
        u_f = branch_paths(fine, fine.times)[0][::2]
        np.testing.assert_allclose(u_f, u_c, atol=1e-20)

import numpy as np
import pytest

import xferopt as xo
from conftest import ENERGY, random_pulse


class TestMakePulse:
    def test_linear_ramp(self):
        p = xo.make_pulse([0.0, np.pi / 4, np.pi / 2], 1.0)
        np.testing.assert_allclose(p.amplitudes(), np.pi / 2)

    def test_nonzero_first_sample_rejected(self):
        with pytest.raises(ValueError, match="first phase"):
            xo.make_pulse([0.1, 0.5, np.pi / 2], 1.0)

    def test_too_few_samples_rejected(self):
        with pytest.raises(ValueError, match="at least 3"):
            xo.make_pulse([0.0, np.pi / 2], 1.0)

    def test_nonpositive_tf_rejected(self):
        with pytest.raises(ValueError, match="t_f"):
            xo.make_pulse([0.0, 0.5, np.pi / 2], 0.0)

    def test_samples_stored_unmodified(self):
        samples = [0.0, 0.3, 1.9, np.pi / 2]
        p = xo.make_pulse(samples, 2.0)
        np.testing.assert_array_equal(p.phases, samples)

    def test_phases_immutable(self):
        p = xo.make_pulse([0.0, 0.5, 1.0], 1.0)
        with pytest.raises(ValueError):
            p.phases[1] = 0.0


class TestFastestPulse:
    def test_tmin_at_reference_energy(self):
        p = xo.fastest_pulse(xo.EnergyBudget(np.pi ** 2 / 4), 64)
        assert p.t_f == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(p.amplitudes(), np.pi / 2, rtol=1e-12)

    def test_halving_energy_doubles_tmin(self):
        p = xo.fastest_pulse(xo.EnergyBudget(np.pi ** 2 / 8), 64)
        assert p.t_f == pytest.approx(2.0, rel=1e-15)

    @pytest.mark.parametrize("energy", [0.3, 1.0, ENERGY, 17.2])
    def test_energy_matches_budget(self, energy):
        p = xo.fastest_pulse(xo.EnergyBudget(energy), 512)
        assert xo.pulse_energy(p) == pytest.approx(energy, rel=1e-12)

    def test_completes_transfer(self):
        p = xo.fastest_pulse(xo.EnergyBudget(1.0), 16)
        assert p.is_transfer_complete()


class TestPulseEnergy:
    def test_linear_ramp(self):
        p = xo.make_pulse(np.linspace(0, np.pi / 2, 33), 1.0)
        assert xo.pulse_energy(p) == pytest.approx((np.pi / 2) ** 2, rel=1e-14)

    def test_constant_zero(self):
        p = xo.make_pulse(np.zeros(17), 1.0)
        assert xo.pulse_energy(p) == 0.0

    def test_rescaling_multiplies_energy(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            p = random_pulse(rng, 40, 2.3)
            e0 = xo.pulse_energy(p)
            for a in (0.5, 1.0, 2.0, 6.25):
                assert xo.pulse_energy(xo.scale_pulse(p, a)) == pytest.approx(a * e0, rel=1e-12)


class TestControlAmplitude:
    def test_fastest_is_constant(self):
        p = xo.fastest_pulse(xo.EnergyBudget(ENERGY), 32)
        for t in (0.0, 0.37, 0.9999, 1.0):
            assert xo.control_amplitude(p, t) == pytest.approx(np.pi / 2, rel=1e-12)

    def test_constant_phase_is_zero(self):
        p = xo.make_pulse(np.zeros(9), 3.0)
        assert xo.control_amplitude(p, 1.7) == 0.0

    def test_two_segment_step(self):
        p = xo.make_pulse([0.0, np.pi / 2, np.pi / 2], 2.0)
        assert xo.control_amplitude(p, 0.0) == pytest.approx(np.pi / 2)
        assert xo.control_amplitude(p, 0.999) == pytest.approx(np.pi / 2)
        # right-continuous at the boundary, last-segment value at t_f
        assert xo.control_amplitude(p, 1.0) == 0.0
        assert xo.control_amplitude(p, 2.0) == 0.0

    def test_out_of_range_rejected(self):
        p = xo.make_pulse([0.0, 0.2, 0.4], 1.0)
        with pytest.raises(ValueError):
            xo.control_amplitude(p, -0.01)
        with pytest.raises(ValueError):
            xo.control_amplitude(p, 1.01)

    def test_trapezoid_integral_reproduces_phases(self):
        rng = np.random.default_rng(11)
        p = random_pulse(rng, 64, 1.9)
        rebuilt = np.concatenate([[0.0], np.cumsum(p.amplitudes() * p.dt)])
        np.testing.assert_allclose(rebuilt, p.phases, atol=1e-12)


class TestScalePulse:
    def test_identity(self):
        p = xo.make_pulse([0.0, 0.4, 1.1], 1.5)
        q = xo.scale_pulse(p, 1.0)
        assert q.t_f == p.t_f
        np.testing.assert_array_equal(q.phases, p.phases)

    def test_compression(self):
        p = xo.make_pulse([0.0, 0.4, 1.1], 1.5)
        q = xo.scale_pulse(p, 2.0)
        assert q.t_f == pytest.approx(0.75)
        assert xo.pulse_energy(q) == pytest.approx(2 * xo.pulse_energy(p), rel=1e-14)

    def test_nonpositive_factor_rejected(self):
        p = xo.make_pulse([0.0, 0.4, 1.1], 1.5)
        with pytest.raises(ValueError):
            xo.scale_pulse(p, 0.0)


def test_fastest_pulse_is_unique_energy_minimiser():
    # Any other transfer-complete pulse at t_f = t_min needs strictly more energy.
    budget = xo.EnergyBudget(ENERGY)
    ramp = xo.fastest_pulse(budget, 48)
    rng = np.random.default_rng(5)
    for _ in range(20):
        bump = rng.normal(0.0, 0.02, ramp.phases.size)
        bump[0] = bump[-1] = 0.0
        perturbed = xo.make_pulse(ramp.phases + bump, ramp.t_f)
        assert xo.pulse_energy(perturbed) > ENERGY


class TestPulseCsv:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        p = random_pulse(rng, 50, 2.7)
        path = tmp_path / "pulse.csv"
        xo.write_pulse_csv(p, path)
        q = xo.read_pulse_csv(path)
        assert q.t_f == p.t_f
        np.testing.assert_array_equal(q.phases, p.phases)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,phase,amp\n0,0,1\n")
        with pytest.raises(xo.PulseCsvError, match="line 1"):
            xo.read_pulse_csv(path)

    def test_bad_float_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,phi,V\n0,0,1\n0.5,oops,1\n1,1,1\n")
        with pytest.raises(xo.PulseCsvError, match="line 3"):
            xo.read_pulse_csv(path)

    def test_non_monotone_time(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,phi,V\n0,0,1\n0.5,0.5,1\n0.4,1,1\n1,1.5,1\n")
        with pytest.raises(xo.PulseCsvError, match="increasing"):
            xo.read_pulse_csv(path)

    def test_too_few_rows(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,phi,V\n0,0,1\n1,1,1\n")
        with pytest.raises(xo.PulseCsvError, match="3 data rows"):
            xo.read_pulse_csv(path)

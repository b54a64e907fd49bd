import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from echolock.integrator import (AtomContext, IntegrationError, _rhs, derivative, evolve,
                                 output_times, plan_steps)
from echolock.model import AtomState, Pulse, PulseSequence, SystemParams, khz_to_angular

PI = math.pi


def _random_rho(rng):
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def test_kernel_matches_reference():
    rng = np.random.default_rng(7)
    params = SystemParams(5, 3, 1, 7, 2, 0.5)
    ctx = AtomContext(1.3, -0.4, params)
    for _ in range(5):
        rho = _random_rho(rng)
        w1, w2 = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
        out = np.empty((3, 3), complex)
        _rhs(rho, w1, w2, ctx.delta1, ctx.delta2, params.angular(), out)
        np.testing.assert_allclose(out, derivative(rho, w1, w2, ctx), atol=1e-14)


def test_coherence_equation_terms():
    # drho13/dt = -i W1 (rho11 - rho33) - i W2 rho12 - i d1 rho13 - g13 rho13
    rng = np.random.default_rng(3)
    rho = _random_rho(rng)
    params = SystemParams(deph13=4.0)
    ctx = AtomContext(0.7, 0.2, params)
    w1, w2 = 0.3 + 0.1j, -0.2 + 0.5j
    g13 = khz_to_angular(4.0)
    want = (-1j * w1 * (rho[0, 0] - rho[2, 2]) - 1j * w2 * rho[0, 1]
            - 1j * ctx.delta1 * rho[0, 2] - g13 * rho[0, 2])
    assert derivative(rho, w1, w2, ctx)[0, 2] == pytest.approx(want, abs=1e-14)


def _single(shape, area, channel=1, dur=1.0, pops=(1.0, 0.0, 0.0)):
    p = Pulse("custom", channel, shape, 1.0 + 8 * dur * (shape == "sech"),
              dur, area)
    lo, hi = p.support
    return PulseSequence((p,), 0.0, hi + 0.5, pops)


@settings(max_examples=25, deadline=None)
@given(area=st.floats(0.0, 4 * PI))
def test_square_rabi_rotation(area):
    seq = _single("square", area)
    traj = evolve(seq, AtomContext(0.0, 0.0, SystemParams()), dt_out=0.5)
    assert traj.rho[-1, 2, 2].real == pytest.approx(math.sin(area / 2) ** 2, abs=1e-8)


def test_sech_pi_pulse_inverts():
    seq = _single("sech", PI, dur=0.1)
    traj = evolve(seq, AtomContext(0.0, 0.0, SystemParams()), dt_out=0.1)
    lost = 4 / PI * math.exp(-8)  # tail truncation
    assert traj.rho[-1, 2, 2].real == pytest.approx(math.sin(PI * (1 - lost) / 2) ** 2,
                                                    abs=1e-9)


def test_channel2_transfer_from_excited():
    seq = _single("square", 0.6 * PI, channel=2, pops=(0.0, 0.0, 1.0))
    traj = evolve(seq, AtomContext(0.0, 0.0, SystemParams()), dt_out=0.5)
    assert traj.rho[-1, 2, 2].real == pytest.approx(math.cos(0.3 * PI) ** 2, abs=1e-8)
    assert traj.rho[-1, 1, 1].real == pytest.approx(math.sin(0.3 * PI) ** 2, abs=1e-8)


def test_free_precession_closed_form():
    rho0 = np.full((3, 3), 0.0, complex)
    rho0[0, 0] = rho0[2, 2] = 0.5
    rho0[0, 2] = rho0[2, 0] = 0.5j
    seq = PulseSequence((), 0.0, 200.0, (1.0, 0.0, 0.0))
    d = khz_to_angular(100.0)
    params = SystemParams(deph13=2.0)
    traj = evolve(seq, AtomContext(d, 0.0, params), dt_out=1.0, rho0=rho0)
    g = khz_to_angular(2.0)
    want = 0.5j * np.exp(-1j * d * traj.times - g * traj.times)
    np.testing.assert_allclose(traj.element(0, 2), want, atol=1e-8)


def test_population_decay_branches():
    seq = PulseSequence((), 0.0, 50.0, (0.0, 0.0, 1.0))
    params = SystemParams(gamma31_pop=3.0, gamma32_pop=1.0)
    traj = evolve(seq, AtomContext(0.0, 0.0, params), dt_out=5.0)
    p33 = np.exp(-khz_to_angular(4.0) * traj.times)
    np.testing.assert_allclose(traj.rho[:, 2, 2].real, p33, atol=1e-10)
    np.testing.assert_allclose(traj.rho[:, 0, 0].real, 0.75 * (1 - p33), atol=1e-10)
    np.testing.assert_allclose(traj.rho[:, 1, 1].real, 0.25 * (1 - p33), atol=1e-10)


def test_spin_relaxation():
    seq = PulseSequence((), 0.0, 20.0, (0.0, 1.0, 0.0))
    traj = evolve(seq, AtomContext(0.0, 0.0, SystemParams(gamma21_pop=10.0)), dt_out=4.0)
    np.testing.assert_allclose(traj.rho[:, 1, 1].real,
                               np.exp(-khz_to_angular(10.0) * traj.times), atol=1e-10)


def test_trace_and_hermiticity_preserved():
    ps = (Pulse("D", 1, "sech", 5, 0.1, PI / 2), Pulse("B1", 2, "square", 10, 0.1, PI),
          Pulse("R", 1, "square", 30, 0.2, PI))
    seq = PulseSequence(ps, 0, 60)
    traj = evolve(seq, AtomContext(1.7, 0.0, SystemParams(5, 5, 1, 5, 5, 1)), dt_out=0.5)
    for i in range(len(traj)):
        traj.state(i)  # validates trace, Hermiticity, diagonal range
    assert np.abs(np.trace(traj.rho, axis1=1, axis2=2) - 1).max() < 1e-12


def test_output_grid_and_plan():
    t = output_times(0.0, 45.0, 0.05)
    assert len(t) == 901 and t[-1] == pytest.approx(45.0)
    seq = PulseSequence((Pulse("R", 1, "square", 20.0, 0.2, PI),), 0, 45)
    plan = plan_steps(seq, 0.05)
    assert np.all(np.diff(plan.bounds) > 0)
    assert (plan.out_slot >= 0).sum() == len(plan.out_times)
    with pytest.raises(ValueError):
        output_times(0, 1, 0.0)


def test_overflow_reported():
    seq = PulseSequence((), 0.0, 1.0)
    rho0 = np.diag([1.0, 0, 0]).astype(complex)
    rho0[0, 0] = np.inf
    with pytest.raises(IntegrationError, match="non-finite"):
        evolve(seq, AtomContext(0.0, 0.0, SystemParams()), 0.5, rho0=rho0)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from echolock.analysis import (beer_absorption, decay_asymptote, delta_pulse_oracle,
                               echo_fwhm, eval_decay_model, fit_decay, noise_budget,
                               population_transfer_curve, read_decay_csv)
from echolock.model import EnsembleSpec, Pulse, PulseSequence

PI = math.pi


def test_decay_model_examples():
    assert eval_decay_model(3.0, 3.0, 10.0, 0.7) == 1.0
    assert eval_decay_model(1e9, 0.0, 1.0, 1.211) == pytest.approx(0.30, abs=5e-4)
    assert eval_decay_model(20.0, 0.0, 10.0, 0.0) == pytest.approx(math.exp(-4))
    with pytest.raises(ValueError):
        eval_decay_model(0.5, 1.0, 10.0, 0.0)
    with pytest.raises(ValueError):
        eval_decay_model(1.0, 0.0, -1.0, 0.0)


@given(a=st.floats(0, 50), b=st.floats(0, 50))
def test_asymptote_monotone(a, b):
    lo, hi = sorted((a, b))
    assert decay_asymptote(lo) <= decay_asymptote(hi)


def _synthetic(tau, n, k=16, t0=0.9):
    t = t0 + tau * np.array([0, .05, .1, .2, .3, .5, .7, 1, 1.3, 1.7, 2.2, 3, 4, 5.5, 7.5, 10])[:k]
    return t, eval_decay_model(t, t0, tau, n)


def test_fit_round_trip_paper_values():
    t, y = _synthetic(165.0, 1.211)
    fit = fit_decay(zip(t, y))
    assert fit.tau == pytest.approx(165.0, rel=1e-2)
    assert fit.n == pytest.approx(1.211, rel=1e-2)
    assert fit.delta_t == t[0] and fit(t[0]) == 1.0
    assert fit.rms < 1e-8


def test_fit_with_noise():
    t, y = _synthetic(165.0, 1.211)
    rng = np.random.default_rng(20240501)
    fit = fit_decay(zip(t, y * (1 + 0.02 * rng.standard_normal(len(y)))))
    assert fit.tau == pytest.approx(165.0, rel=0.10)


def test_fit_errors():
    with pytest.raises(ValueError, match="at least 4"):
        fit_decay([(0, 1), (1, 0.5)])
    with pytest.raises(ValueError, match="flat data"):
        fit_decay([(t, 0.4) for t in range(6)])
    with pytest.raises(ValueError, match="increasing"):
        fit_decay([(0, 1), (2, .5), (1, .4), (3, .3)])


def test_read_decay_csv(tmp_path):
    f = tmp_path / "d.csv"
    f.write_text("t_s,intensity\n1,1\n2,0.5\n")
    pts, unit = read_decay_csv(f)
    assert unit == "s" and pts == [(1.0, 1.0), (2.0, 0.5)]
    f.write_text("time,intensity\n1,1\n")
    with pytest.raises(ValueError, match="header"):
        read_decay_csv(f)


def test_transfer_curve_examples():
    curve = dict(population_transfer_curve([0.0, 0.6 * PI, 0.8 * PI, PI]))
    assert curve[0.0] == pytest.approx(1.0, abs=1e-9)
    assert curve[0.6 * PI] == pytest.approx(0.3454915, abs=1e-6)
    assert curve[0.8 * PI] == pytest.approx(0.0954915, abs=1e-6)
    assert curve[PI] == pytest.approx(0.0, abs=1e-6)


def test_beer_absorption():
    assert beer_absorption(0.0) == 0.0
    assert beer_absorption(1.0) == pytest.approx(0.6321206, abs=1e-7)
    assert beer_absorption(2.4) == pytest.approx(0.9092820, abs=1e-7)
    with pytest.raises(ValueError):
        beer_absorption(-0.1)


def test_noise_budget():
    nb = noise_budget(4.7e18, 1e-7, 0.1, 160.0, 1e-7)
    assert nb.n_atoms == pytest.approx(4.7e11)
    assert nb.eta == pytest.approx(6.25e-7)
    assert nb.n_e == pytest.approx(2.9375e5)
    assert nb.n_f == pytest.approx(0.029375)
    assert noise_budget(4.7e18, 1e-7, 0.1, 160.0, 0.0).n_f == 0.0
    double = noise_budget(4.7e18, 2e-7, 0.1, 160.0, 1e-7)
    assert double.n_e == 2 * nb.n_e and double.n_f == 2 * nb.n_f
    with pytest.raises(ValueError):
        noise_budget(-1.0, 1e-7, 0.1, 160.0, 1e-7)


def _seq(*pulses, t_end=60.0):
    return PulseSequence(tuple(Pulse(r, c, "square", t, 0.1, a) for r, c, t, a in pulses),
                         0.0, t_end)


def test_oracle_templates():
    spec = EnsembleSpec(340, 800)
    two = delta_pulse_oracle(_seq(("D", 1, 5, PI / 2), ("R", 1, 20, PI)), spec)
    assert (two.template, two.echo_time, two.amplitude) == ("two-pulse", 35.0, 0.5)
    three = delta_pulse_oracle(_seq(("D", 1, 5, PI / 2), ("W", 1, 10, PI / 2),
                                    ("R", 1, 40, PI / 2)), spec)
    assert three.echo_time == 45.0 and three.amplitude == pytest.approx(0.25)
    locked = delta_pulse_oracle(_seq(("D", 1, 5, PI / 4), ("W", 1, 10, PI / 2),
                                     ("B1", 2, 10.2, PI), ("B2", 2, 30, 3 * PI),
                                     ("R", 1, 30.3, PI / 2)), spec)
    assert locked.echo_time == pytest.approx(35.3)
    weak = delta_pulse_oracle(_seq(("D", 1, 5, 1e-3), ("R", 1, 20, PI)), spec)
    assert weak.amplitude == pytest.approx(0.5e-3, rel=1e-6)
    assert two.fwhm == echo_fwhm(340.0) == pytest.approx(2.595712943, rel=1e-9)
    for bad in (_seq(("D", 1, 5, 1)), _seq(("D", 1, 5, 1), ("B1", 2, 7, PI), ("R", 1, 20, 1)),
                _seq(("D", 2, 5, 1), ("R", 1, 20, 1))):
        with pytest.raises(ValueError, match="unrecognised template"):
            delta_pulse_oracle(bad, spec)

"""Density-matrix simulation of optically locked photon echoes in a Lambda medium."""

__version__ = "0.1.0"

from .model import (AtomState, EnsembleSpec, Pulse, PulseSequence, SystemParams,
                    ValidationError, derived_t1_opt)
from .sequence import (Scenario, ScenarioError, check_phase_matching, parse_scenario,
                       rabi_envelope, serialize_scenario, validate_locking)
from .integrator import AtomContext, Trajectory, evolve
from .ensemble import EchoTrace, echo_metrics, run_ensemble, sample_detunings
from .analysis import (beer_absorption, delta_pulse_oracle, eval_decay_model, fit_decay,
                       noise_budget, population_transfer_curve)

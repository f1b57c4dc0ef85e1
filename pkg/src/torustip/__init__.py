"""Delay-oscillator tipping simulator.

Fixed-step integration of a periodically forced, delayed-feedback
oscillator with additive noise, plus the experiment suite built on it:
hysteresis sweeps with drop-event detection, resonance-tongue scans,
noise-driven intermittency statistics, and multistability probing.
"""

from .errors import (DegenerateGeometry, IncommensurateSampling,
                     InsufficientData, InvalidDelay, NonFiniteState,
                     SeriesTooShort, TorustipError, ValidationError)
from .sdde_core import (Constant, ConstantHistory, IntegratorConfig,
                        LinearRamp, ModelParams, ReplaySegment,
                        StepPerturbation, TimeSeries, drift,
                        evaluate_schedule, gaussian_stream, integrate)
from .observables import (AmplitudeSeries, AttractorClass, LockingRatio,
                          ResidenceStats, StroboscopicSection, Threshold,
                          amp_window, choose_threshold, detect_locking,
                          residence_times, rotation_number, stroboscopic)
from .experiments import (DropEvent, IntermittencyResult,
                          MultistabilityReport, StateGroup, SweepResult,
                          TongueMap, detect_drops, hysteresis_sweep,
                          intermittency_protocol, multistability_probe,
                          ramp_run, tongue_scan)

__version__ = "0.1.0"

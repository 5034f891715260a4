"""Gray-box toolkit for the electrical dynamics of short-circuit GMAW welding.

Simulates the switched equivalent circuit of the welding loop, identifies
its parameters from measured waveforms, runs the switched PID current
controller in closed loop, verifies the tuning and computes the standard
welding performance measures.
"""

__version__ = "0.1.0"

from .model import (ActuatorMap, CircuitParams, DegenerateParameterError,
                    LinearSystem, ea_transfer, load_params, save_params,
                    sc_transfer, table1)
from .simulator import (Phase, PlantState, SimConfig, SimulationDivergedError,
                        Waveform, run_closed_loop, run_open_loop, step,
                        switch_phase)
from .control import (ControllerState, DetectorConfig, PidGains, ReferenceSpec,
                      controller_callback, detect_phase, load_gains, pid_step,
                      reference, table2, table3)
from .identification import (FitReport, NoSegmentsError, Segment, ThetaEa,
                             ThetaSc, fit, predict, segment,
                             segments_from_labels)
from .analysis import (NeverSettlesError, SettlingSpec, TuningReport,
                       closed_loop_poles, gain_sweep, measure_settling,
                       open_loop_slope_estimate, verify_tuning)
from .metrics import (InsufficientCyclesError, MetricsReport, compare_reports,
                      compute_metrics, effective_value)

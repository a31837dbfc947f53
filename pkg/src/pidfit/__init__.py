"""PID tuning by fitting the closed-loop step response to a desired one."""
from .baselines import (ReactionCurve, UltimatePoint, lambda_pi, pole_placement_pi_first_order,
                        reaction_curve, ultimate_point, zn_reaction_pid, zn_ultimate)
from .errors import (ConfigError, DomainError, IndeterminateError, InfeasibleTargetError,
                     NotFoundError, NotSettledError, PidfitError, SingularityError, StructuralError)
from .lti import (FrequencyResponse, PidGains, Polynomial, SimGrid, TimeSeries, TransferFunction,
                  closed_loop, dc_gain, freq_response, pid_tf, poly_mul, poly_roots,
                  simulate_closed_loop, step_response, tf_feedback_unity)
from .metrics import (MetricsReport, decay_ratio, iae, is_stable, max_sensitivity,
                      percent_overshoot, settling_time_2pct)
from .reference import (DesiredSpec, damping_from_overshoot, desired_response, make_fotd,
                        make_second_order, natural_frequency, second_order)
from .tuner import (TuneProblem, TuneResult, check_stability_and_report, evaluate, l2_objective,
                    tune)

__version__ = "0.1.0"

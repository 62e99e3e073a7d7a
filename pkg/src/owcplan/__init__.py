"""owcplan: indoor optical-wireless planning toolkit.

Deterministic Lambertian ray tracing of indoor visible-light channels plus
exact optimization of the access-point / wavelength / receiver-branch
assignment that maximizes the sum of user SINRs, with an exportable
linearized MILP formulation.
"""

from .allocation import (AllocationProblem, AllocationResult, Assignment,
                         build_problem, check_feasible, objective,
                         optimize_branches, sinr, solve, solve_bnb,
                         solve_exhaustive)
from .channel import (ChannelMatrix, ImpulseResponse, TraceParams, Tracer,
                      bandwidth_3db, compute_channel_matrix, los_power,
                      received_optical_power, rms_delay_spread,
                      trace_impulse_response)
from .geometry import (BoxBlocker, Element, ElementSet, PlaneBlocker, Surface,
                       mesh_surface, mesh_surfaces, occluded, room_surfaces)
from .milp import MilpModel, build_milp, export_lp
from .radiometry import (NoiseParams, ResponsivityTable, electrical_power,
                         lambertian_order, receiver_noise, shot_noise)
from .report import (UserReportRow, build_report_rows, data_rate, emit_report,
                     parse_csv, parse_json, write_csv, write_json)
from .scene import (ReceiverBranch, ReceiverStation, ScenarioConfig,
                    TransmitterUnit, WavelengthSpec, builtin_scenario,
                    concentrator_gain, default_adr_branches)

__version__ = "0.1.0"

"""Delay-based reservoir computing: delay-system simulation, virtual nodes, readouts and benchmarks."""

from .dde import (DelaySnapWarning, Drive, FeedbackTap, HistoryBuffer, Nonlinearity, SystemParams,
                  Trajectory, integrate, rhs, steady_state)
from .errors import (ConfigError, ConfigurationError, ContractError, DelayRCError, DivergenceError,
                     GenerationError, MetricError, NormalizationError, ParameterError, ParseError,
                     RankError, RegimeError, StatisticsError)
from .experiment import derive_seed, evaluate_task
from .reservoir import (InputMask, MaskKind, Mode, ReservoirConfig, StateMatrix, double_delay_config,
                        make_config, make_mask, multiplex, run)
from .tasks import TaskDataset, channel_eq, mc_probe, narma10, santa_fe_load, santa_fe_surrogate
from .training import (MemoryCapacity, ProbeSettings, ReadoutWeights, TeacherMatrix, memory_capacity,
                       nmse, predict, ridge_train, ser)
from .virtual import (CouplingKernel, NodeGrid, SamplingRule, continuous_to_nodes, coupling_kernel,
                      discrete_map_run, discrete_map_step, equivalence_check)

__version__ = "0.1.0"

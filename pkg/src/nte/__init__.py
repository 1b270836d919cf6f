"""Neural tree expansion: learned-policy-guided MCTS for multi-robot reach-avoid games."""

from .game import (ContractViolation, DynamicsModel, GameSpec, JointState,
                   Observation, RobotEvent, RobotState, StepEvents, Team,
                   ValueObservation, check_admissible, game_step, is_terminal,
                   observe, reconstruct_state, step_double_integrator,
                   step_dubins3d, terminal_value, value_observation)
from .nets import (ArchSpec, GaussianOutput, NetworkParameters, SetInput,
                   TrainingSample, forward, gradient, init_params, nll_loss,
                   policy_arch, sample, train, value_arch)
from .search import (NetBundle, RootStats, SearchConfig, TreeNode,
                     expert_policy, learner_policy, search)

__version__ = "0.1.0"

from .oracle import OracleAgent, bellman_residual, greedy_q, solve_mdp, value_iteration
from .qlearning import LearningSchedule, QLearningAgent, QTable, qlearn_select, qlearn_update
from .snapshot import load_qtable, load_vfa, save_qtable, save_vfa
from .vfa import (MpccAgent, VfaAgent, VfaParams, coarse_assignment, fine_tune, level_blocks,
                  mpcc_select, selection_penalty, vfa_features, vfa_gradient, vfa_qhat,
                  vfa_select, vfa_update)

__all__ = [
    "OracleAgent", "bellman_residual", "greedy_q", "solve_mdp", "value_iteration",
    "LearningSchedule", "QLearningAgent", "QTable", "qlearn_select", "qlearn_update",
    "load_qtable", "load_vfa", "save_qtable", "save_vfa",
    "MpccAgent", "VfaAgent", "VfaParams", "coarse_assignment", "fine_tune", "level_blocks",
    "mpcc_select", "selection_penalty", "vfa_features", "vfa_gradient", "vfa_qhat",
    "vfa_select", "vfa_update",
]

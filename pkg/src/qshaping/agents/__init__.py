from .buffer import ReplayBuffer
from .heuristic_set import HeuristicPair, HeuristicSet, heuristic_table, polarity_of
from .tabular import TabularAgent, apply_heuristics, batched_q_learning, shaped_td_update
from .td3 import (Td3Agent, Td3Config, policy_shaping_loss, policy_shaping_phase,
                  q_shaping_loss, q_shaping_phase, select_action, td3_train_step)

__all__ = [
    "ReplayBuffer", "HeuristicPair", "HeuristicSet", "heuristic_table", "polarity_of",
    "TabularAgent", "apply_heuristics", "batched_q_learning", "shaped_td_update",
    "Td3Agent", "Td3Config", "policy_shaping_loss", "policy_shaping_phase", "q_shaping_loss",
    "q_shaping_phase", "select_action", "td3_train_step",
]

"""Q-shaping: heuristic Q-value and policy shaping for value-based RL."""

__version__ = "0.1.0"

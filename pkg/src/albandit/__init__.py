"""Model-selection bandit lab: norm- and dimension-adaptive linear bandits."""

__version__ = "0.1.0"

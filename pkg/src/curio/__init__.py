"""Meta-search over curiosity programs for reinforcement learning agents."""

__version__ = "0.1.0"

"""Multiagent Q-learning in congestion problems with local, global, difference and abstract rewards."""

__version__ = "0.1.0"

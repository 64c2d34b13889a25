"""Experimental-design regret minimization for linear and combinatorial bandits."""

__version__ = "0.1.0"

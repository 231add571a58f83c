"""Collaborative reference game toolkit: worlds, live sessions, corpora,
analysis and target-selection baselines."""

__version__ = "0.1.0"

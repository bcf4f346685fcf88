"""Behavior-manifold learning from speech: features, sampling, models, evaluation."""

__version__ = "0.1.0"

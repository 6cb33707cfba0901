"""Experiment orchestration: the training loop, metrics, reports and sweeps."""

"""Experiment harness: configuration, training runs, sweeps, reports and validation."""

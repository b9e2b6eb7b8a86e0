"""Evolutionary design of feedforward networks with gradient-based local trainers."""

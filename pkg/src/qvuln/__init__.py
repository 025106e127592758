"""Hybrid classical/quantum LSTM pipeline for code vulnerability classification."""

__version__ = "0.1.0"

"""Causal and mutual-information feature selection for weather-driven load forecasting."""

__version__ = "0.1.0"

"""Anomaly detection on streams: a growing tree of Gaussian density estimators, mixed and thresholded online."""

__version__ = "0.1.0"

"""Two-body pose forecasting with separable graph convolutions."""

__version__ = "0.1.0"

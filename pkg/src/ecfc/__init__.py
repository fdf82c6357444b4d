"""Half-hourly building energy forecasting with a numpy LSTM."""

__version__ = "0.1.0"

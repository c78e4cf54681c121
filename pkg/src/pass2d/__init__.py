"""Pass-receiver prediction for Soccer Simulation 2D: features, datasets, models."""

__version__ = "0.1.0"

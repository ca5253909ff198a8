from .main import log_predictive_points, predict, predictive_density, write_predictive

__all__ = ["log_predictive_points", "predict", "predictive_density", "write_predictive"]

from .main import ScoreModel, log_ratio_distribution_check
from .utils import covariance_matrix, cross_covariance

__all__ = ["ScoreModel", "covariance_matrix", "cross_covariance", "log_ratio_distribution_check"]

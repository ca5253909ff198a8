from .main import CrossValidationResult, lps_cross_validation, write_lps
from .utils import assign_folds

__all__ = ["CrossValidationResult", "assign_folds", "lps_cross_validation", "write_lps"]

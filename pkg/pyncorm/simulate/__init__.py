from .main import simulate_dataset, write_dataset

__all__ = ["simulate_dataset", "write_dataset"]

from .main import ChainRun, fit, run_chain

__all__ = ["ChainRun", "fit", "run_chain"]

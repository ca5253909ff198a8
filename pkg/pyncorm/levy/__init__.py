from .main import (
    bound_density_unnorm,
    bound_normalizer,
    check_dominance,
    gamma_integral,
    high_piece_mass,
    jump_mean_given_scores,
    levy_density,
    log_gamma_integral,
    log_levy_density,
    low_piece_mass,
    sample_allocated_jump,
    sample_bound_density,
    sample_jump_given_scores,
    sample_jumps_above,
    tail_mass,
)

__all__ = [
    "bound_density_unnorm",
    "bound_normalizer",
    "check_dominance",
    "gamma_integral",
    "high_piece_mass",
    "jump_mean_given_scores",
    "levy_density",
    "log_gamma_integral",
    "log_levy_density",
    "low_piece_mass",
    "sample_allocated_jump",
    "sample_bound_density",
    "sample_jump_given_scores",
    "sample_jumps_above",
    "tail_mass",
]

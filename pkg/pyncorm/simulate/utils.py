import numpy as np
from scipy.special import expit

# Component means of the mixture data sets
MEANS_I = np.array([-1.0, 1.0])
MEANS_II = np.array([-1.0, 1.0, -2.0, 2.0])

# Noise scale of the regression data set
NOISE_SCALE_III = 0.1


def probabilities_I(x: np.ndarray, r: float) -> np.ndarray:
    """n x 2 component probabilities, p(s = 1) = logistic(r sin(2 pi x))."""
    first = expit(r * np.sin(2 * np.pi * np.asarray(x, dtype=float)))
    return np.column_stack([first, 1 - first])


def probabilities_II(x: np.ndarray) -> np.ndarray:
    """n x 4 component probabilities from the unnormalized weights
    exp(2 sin(2 pi x)), 1/2 + 2/5 (x - 1/2), 1/2 - 2 (x - 1/2)^2 and 1.
    """
    x = np.asarray(x, dtype=float)
    weights = np.column_stack([
        np.exp(2 * np.sin(2 * np.pi * x)),
        0.5 + 0.4 * (x - 0.5),
        0.5 - 2 * (x - 0.5) ** 2,
        np.ones_like(x),
    ])
    return weights / weights.sum(axis=1, keepdims=True)


def sine_bump(x: np.ndarray, a: float, b: float) -> np.ndarray:
    """sin(2 pi (x - a) / (b - a)) on [a, b], zero elsewhere."""
    x = np.asarray(x, dtype=float)
    inside = (x >= a) & (x <= b)
    return np.where(inside, np.sin(2 * np.pi * (x - a) / (b - a)), 0.0)


def step_shift(x: np.ndarray) -> np.ndarray:
    """-2 below 1/3, -3/4 up to 3/4 and 0 above."""
    x = np.asarray(x, dtype=float)
    return np.select([x < 1 / 3, x < 3 / 4], [-2.0, -0.75], default=0.0)


def noise_profile(x: np.ndarray) -> np.ndarray:
    """0.15 (1 + 19 |sin(2 pi x)|)."""
    return 0.15 * (1 + 19 * np.abs(np.sin(2 * np.pi * np.asarray(x, dtype=float))))


def mean_III(x: np.ndarray, a: float, b: float, c: int) -> np.ndarray:
    return sine_bump(x, a, b) + (step_shift(x) if c == 1 else 0.0)


def sd_III(x: np.ndarray, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return NOISE_SCALE_III * (noise_profile(x) if d == 1 else np.ones_like(x))


def draw_components(probabilities: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row by inverting the cumulative probabilities."""
    cumulative = np.cumsum(probabilities, axis=1)
    u = rng.random((probabilities.shape[0], 1))
    return np.minimum((u > cumulative).sum(axis=1), probabilities.shape[1] - 1)

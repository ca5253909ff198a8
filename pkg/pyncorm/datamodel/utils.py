import json
import pathlib
from typing import Any, Dict, Literal, Union

LEVY_FAMILIES = Literal[
    "GeneralizedGamma",
    "Gamma",
    "StableBeta",
    "Beta",
]

SCORE_KINDS = Literal[
    "GaussianProcess",
    "AnovaTwoWay",
]

KERNEL_KINDS = Literal[
    "UnivariateNormal",
    "MultivariateNormal",
]

DATASET_KINDS = Literal["I", "II", "III"]


def parse_value(raw: str) -> Any:
    """Parse the right-hand side of a config line.

    JSON literals (numbers, booleans, null, lists) are decoded; anything
    else is returned as a stripped string, so `kind = Gamma` works without
    quotes.
    """
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw.strip("\"'")


def parse_config_text(text: str) -> Dict[str, Any]:
    """Convert `dotted.key = value` lines into a nested dictionary.

    Args:
        text (str): The config file content. Blank lines and lines starting
            with `#` are ignored. Inline comments are not supported.

    Raises:
        ValueError: If a line has no `=` or a key is repeated or conflicts
            with a namespace (e.g. `sampler = 1` and `sampler.seed = 2`).

    Returns:
        Dict[str, Any]: The nested dictionary.
    """
    config: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"Line {lineno}: expected 'key = value', got '{line}'.")

        key, value = line.split("=", 1)
        parts = [part.strip() for part in key.strip().split(".")]
        if not all(parts):
            raise ValueError(f"Line {lineno}: invalid key '{key.strip()}'.")

        # Walk down the namespaces, creating them on demand
        node = config
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ValueError(f"Line {lineno}: '{part}' is both a value and a namespace.")
            node = child

        if parts[-1] in node:
            raise ValueError(f"Line {lineno}: duplicated key '{key.strip()}'.")
        node[parts[-1]] = parse_value(value)

    return config


def read_config_file(path: Union[str, pathlib.Path]) -> Dict[str, Any]:
    """Read and parse a config file from disk."""
    return parse_config_text(pathlib.Path(path).read_text())

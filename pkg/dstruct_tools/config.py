"""
Configuration loading for dstruct-tools.
"""

import copy
import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

ENV_DATA_DIR = "DSTRUCT_TOOLS_DIR"

_config: Optional[Dict[str, Any]] = None


def _get_fallback_config() -> Dict[str, Any]:
    """Fallback configuration if the bundled JSON file is not available."""
    return {
        "r_max": 6,
        "oracle": {"max_exhaustive_p": 256, "max_p": 1073741824},
        "enumerate": {"max_p": 400},
        "modular": {
            "max_computed_level": 15,
            "levels": [2, 3, 5, 6, 7, 10, 11, 13, 15],
            "table_url": "https://math.mit.edu/~drew/ClassicalModPolys/phi_j_{level}.txt",
            "cache_subdir": "modpoly",
        },
        "protocol": {"shared_secret": "orbit"},
        "walk": {"sample_points": 3},
        "navigate": {"phase2_primes": [2, 3, 5, 7, 11, 13], "phase2_ideals": 3},
    }


def load_config() -> Dict[str, Any]:
    """Load the package configuration, cached after the first call."""
    global _config
    if _config is None:
        config_path = Path(__file__).parent / "config" / "defaults.json"
        try:
            with open(config_path, "r") as f:
                _config = json.load(f)
        except (FileNotFoundError, json.JSONDecodeError):
            _config = _get_fallback_config()
    return _config


def get(key: str, default: Any = None) -> Any:
    """Look up a dotted key such as ``"modular.max_computed_level"``."""
    node: Any = load_config()
    for part in key.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return copy.deepcopy(node)


def data_dir(override: Optional[str] = None) -> Path:
    """
    Resolve the data directory.

    Args:
        override: Explicit directory. If None, uses $DSTRUCT_TOOLS_DIR or ~/.dstruct-tools
    """
    if override:
        return Path(override)
    env = os.environ.get(ENV_DATA_DIR)
    if env:
        return Path(env)
    return Path.home() / ".dstruct-tools"

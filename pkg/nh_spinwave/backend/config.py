from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from dotenv import dotenv_values

from nh_spinwave.backend.logger import GLOBAL_LOGGER as log
from nh_spinwave.backend.exception.custom_exception import DomainError

# ------------------------------------------------------------
# 1) Resolve BASE_DIR
# ------------------------------------------------------------
try:
    BASE_DIR = Path(__file__).resolve().parents[2]
    log.info("BASE_DIR resolved successfully", base_dir=str(BASE_DIR))
except Exception as e:
    log.error("Failed to resolve BASE_DIR", error=str(e))
    raise


class Config:
    BASE_DIR: Path = BASE_DIR

    # ------------------- OUTPUT -------------------
    OUTPUT_ROOT: Path = BASE_DIR / "runs"
    log.info("OUTPUT_ROOT configured", value=str(OUTPUT_ROOT))

    # ------------------- INTEGRATOR ---------------
    DT: float = 1e-3
    DIVERGENCE_CAP: float = 1e6
    STEPS: int = 300
    WORKERS: int = 1
    CHUNK_MODES: int = 512
    log.info(
        "Integrator defaults loaded",
        dt=DT, cap=DIVERGENCE_CAP, steps=STEPS, workers=WORKERS, chunk_modes=CHUNK_MODES,
    )

    # ------------------- SINGLE MODE --------------
    N_MAX: int = 10
    log.info("N_MAX loaded", value=N_MAX)

    # ------------------- OBSERVABLES --------------
    GUESS_SIGMA: float = 1.0
    DISTANCE_BLOCK: int = 256

    # ------------------- LIGHT CONE ---------------
    THRESHOLD_FRACTION: float = 1e-3
    RIDGE_MAX_JUMP: float = 2.0
    # distance windows (inclusive) of the edge fits: past the pre-quench
    # correlation length, inside the reach of the front at t_end
    CHAIN_FIT_WINDOW: Tuple[int, int] = (8, 20)
    SQUARE_FIT_WINDOW: Tuple[int, int] = (5, 12)
    log.info(
        "Light-cone defaults loaded",
        threshold=THRESHOLD_FRACTION,
        max_jump=RIDGE_MAX_JUMP,
        chain_window=CHAIN_FIT_WINDOW,
        square_window=SQUARE_FIT_WINDOW,
    )


# Keys accepted in a parameter file, with the CLI spellings that map onto them
PARAM_KEYS = ("J", "h", "gamma", "gamma_prime", "dimension", "n_sites")
KEY_ALIASES = {"dim": "dimension", "n-sites": "n_sites", "gamma-prime": "gamma_prime"}


def load_param_file(path: Optional[str | Path]) -> Dict[str, str]:
    """Read a ``KEY=value`` parameter file without touching the process environment."""
    if path is None:
        return {}

    path = Path(path)
    if not path.is_file():
        log.error("Parameter file not found", path=str(path))
        raise DomainError(f"Parameter file not found: {path}")

    raw = dotenv_values(path)
    values: Dict[str, str] = {}
    for key, value in raw.items():
        key = KEY_ALIASES.get(key, key)
        if key not in PARAM_KEYS:
            log.error("Unknown key in parameter file", key=key, path=str(path))
            raise DomainError(f"Unknown key '{key}' in {path}; expected one of {', '.join(PARAM_KEYS)}")
        if value is None:
            raise DomainError(f"Key '{key}' in {path} has no value")
        values[key] = value

    log.info("Parameter file loaded", path=str(path), keys=sorted(values))
    return values


def merge_params(file_values: Mapping[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """File values first, then every override that was actually given."""
    merged: Dict[str, Any] = dict(file_values)
    for key, value in overrides.items():
        if value is not None:
            merged[KEY_ALIASES.get(key, key)] = value
    return merged


if __name__ == "__main__":
    config = Config()
    log.info("Config initialized successfully", status="OK")
    print(config.DT)

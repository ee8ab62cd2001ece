# config.py (environment + numeric defaults shared by every module)
import os
from dotenv import load_dotenv, find_dotenv

# Loads ${workspace}/.env if present; doesn't overwrite existing env by default
load_dotenv(find_dotenv(usecwd=True), override=False)


def _env_int(name: str, default: int) -> int:
    try:
        return max(1, int(os.getenv(name) or default))
    except ValueError:
        return default


SCHEMA = "john-forge/1"

JOHN_FORGE_THREADS   = _env_int("JOHN_FORGE_THREADS", 1)
JOHN_FORGE_LOG_LEVEL = os.getenv("JOHN_FORGE_LOG_LEVEL", "WARNING").upper()

# validation bands
SYM_TOL    = 1e-12
NORMAL_TOL = 1e-10

# loewner
DEFAULT_MVEE_EPS      = 1e-9
DEFAULT_CONTACT_TOL   = 1e-6
SUPPORT_WEIGHT_FACTOR = 1e-6   # u_i > factor / m marks a support point
MVEE_MAX_ITER         = 1_000_000

# objective / isotropic
INTERIOR_TOL = 1e-9
JOHN_TOL     = 1e-8
WEIGHT_CLAMP = 1e-14


def threads() -> int:
    """Thread cap, re-read so tests can monkeypatch the environment."""
    return _env_int("JOHN_FORGE_THREADS", JOHN_FORGE_THREADS)

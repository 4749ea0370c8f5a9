"""Domain-level routing: DLSR and DBD IPv6 routing headers, their control and
OAM planes, and a deterministic simulator to exercise them."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def scenario_path(name: str) -> Path:
    """Path of a scenario shipped with the package, e.g. ``"six_domain"``."""
    return Path(str(resources.files(__package__) / "scenarios" / f"{name}.yaml"))

"""Config file discovery.

Resolution order: an explicit ``--config`` path, then the current working
dir, then the platformdirs user config dir. A missing config is not an error;
every run parameter has a default.
"""

from __future__ import annotations

from pathlib import Path

from platformdirs import user_config_dir

APP_NAME = "blessmark"
APP_AUTHOR = "blessmark"

# Prefer .yaml; also accept the .yml spelling.
CONFIG_FILENAMES = ("blessmark.yaml", "blessmark.yml")


def config_dir() -> Path:
    return Path(user_config_dir(APP_NAME, APP_AUTHOR))


def candidate_dirs() -> list[Path]:
    return [Path.cwd(), config_dir()]


def find_config_file() -> Path | None:
    """First existing config file in cwd, then the user config dir. None if absent."""
    for directory in candidate_dirs():
        for name in CONFIG_FILENAMES:
            candidate = directory / name
            if candidate.is_file():
                return candidate
    return None


def resolve_config(explicit: Path | None) -> Path | None:
    """Path to load, or None to run on defaults.

    An explicit path is returned even when it does not exist so the caller can
    report it; discovery only returns files that exist.
    """
    if explicit is not None:
        return Path(explicit)
    return find_config_file()

"""Folding, cone capture and chart gluing of boundary-map extensions.

Submodules are imported lazily so the command line tool can pin thread
environment variables before any numerical library loads.
"""

from importlib import import_module

__version__ = "0.1.0"

_SUBMODULES = (
    "domain",
    "target",
    "gridmap",
    "fileio",
    "energy",
    "folding",
    "cone",
    "covering",
    "minimize",
    "acceptance",
    "errors",
    "cli",
)


def __getattr__(name: str):
    if name in _SUBMODULES:
        module = import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))

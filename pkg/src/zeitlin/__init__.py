"""Structure-preserving low-rank solvers for the Zeitlin model on the sphere.

Submodules are imported lazily so the CLI can pin thread counts through the
environment before numpy loads.
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "cli",
    "diagnostics",
    "integrators",
    "quantization",
    "scenarios",
    "states",
    "stream",
)


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))

"""Matrix completion with exact infinite-width network kernels.

Submodules are imported lazily so the CLI can configure BLAS thread pools
before numpy loads.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = ("activations", "priors", "fcntk", "cntk", "expand", "solve",
               "metrics", "kernel_io", "images", "errors", "cli")


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(_SUBMODULES) + ["__version__"])

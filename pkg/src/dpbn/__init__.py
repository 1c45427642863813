"""Back-projecting auto-encoder with trainable compound activations.

Submodules:
    maxent    range-specific activation functions and inverses
    tca       trainable compound activations
    saddle    per-layer back-projection (saddle-point) solver
    network   the auto-encoder: encode / decode / autoencode
    training  gradients, optimizer loop, finite-difference checker
    baseline  conventional feed-forward auto-encoder for comparison
    data      IDX ingestion and the preprocessing pipeline
    synth     deterministic stand-in corpus generator
    modelio   bit-exact model persistence
    config    JSON run configuration
    cli       command-line entry points

Submodules load lazily so the command-line wrapper can pin the numeric
thread count before anything imports the linear-algebra stack.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = ("maxent", "tca", "saddle", "network", "training", "baseline",
               "data", "synth", "modelio", "config", "cli", "errors",
               "rootfind")


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))

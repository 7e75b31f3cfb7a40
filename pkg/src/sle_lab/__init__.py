"""Numerical laboratory for chordal Loewner chains and SLE driver pairs."""

__version__ = "0.1.0"

from . import (
    driver,
    ensemble,
    errors,
    geometry,
    harness,
    identities,
    loewner,
    martingale,
)

__all__ = [
    "driver",
    "ensemble",
    "errors",
    "geometry",
    "harness",
    "identities",
    "loewner",
    "martingale",
    "__version__",
]

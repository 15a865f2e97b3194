"""Fixed library of test functions f (with f', f'') for weak-form diagnostics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class TestFunction:
    name: str
    f: Callable
    df: Callable
    d2f: Callable
    bounded: bool = False
    complex_valued: bool = False

    __test__ = False  # keep pytest from collecting this class


def _one():
    return TestFunction(
        "one", lambda x: np.ones_like(x, dtype=float), lambda x: np.zeros_like(x, dtype=float),
        lambda x: np.zeros_like(x, dtype=float), bounded=True)


def _x():
    return TestFunction("x", lambda x: np.asarray(x, float), lambda x: np.ones_like(x, dtype=float),
                        lambda x: np.zeros_like(x, dtype=float))


def _x2half():
    return TestFunction("x2half", lambda x: 0.5 * np.asarray(x) ** 2, lambda x: np.asarray(x, float),
                        lambda x: np.ones_like(x, dtype=float))


def _bump(center: float = 0.0, width: float = 1.0):
    # Gaussian bump: bounded with bounded derivatives of all orders
    def f(x):
        u = (np.asarray(x) - center) / width
        return np.exp(-0.5 * u * u)

    def df(x):
        u = (np.asarray(x) - center) / width
        return -u / width * np.exp(-0.5 * u * u)

    def d2f(x):
        u = (np.asarray(x) - center) / width
        return (u * u - 1.0) / width**2 * np.exp(-0.5 * u * u)

    return TestFunction(f"bump({center},{width})", f, df, d2f, bounded=True)


def _cauchy(z: complex):
    z = complex(z)
    if z.imag == 0.0:
        raise ValueError("Cauchy test function needs z off the real axis")
    return TestFunction(
        f"cauchy({z})",
        lambda x: 1.0 / (z - np.asarray(x)),
        lambda x: 1.0 / (z - np.asarray(x)) ** 2,
        lambda x: 2.0 / (z - np.asarray(x)) ** 3,
        bounded=True,
        complex_valued=True,
    )


LIBRARY = {"one": _one, "x": _x, "x2half": _x2half, "bump": _bump, "cauchy": _cauchy}


def get(name: str, **params) -> TestFunction:
    """Look up a test function by id, e.g. ``get("bump", center=0.5, width=0.3)``."""
    if isinstance(name, TestFunction):
        return name
    if name not in LIBRARY:
        raise KeyError(f"unknown test function {name!r}; library: {sorted(LIBRARY)}")
    return LIBRARY[name](**params)

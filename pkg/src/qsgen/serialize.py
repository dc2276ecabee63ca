"""JSON encoding of complex scalars, matrices and generators.

Complex scalars are two-element arrays ``[re, im]``; matrices are nested
row-major arrays of such pairs.  Plain real numbers are accepted on input.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .generators import StochGen
from .matrix_space import SchurActionMap, SuperOperator, as_matrix


def complex_to_json(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _decode(obj, ndim: int, what: str) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"malformed {what}: {exc}") from exc
    if arr.ndim == ndim + 1 and arr.shape[-1] == 2:
        out = arr[..., 0] + 1j * arr[..., 1]
    elif arr.ndim == ndim:
        out = arr.astype(complex)
    else:
        raise InputError(f"malformed {what}: unexpected shape {arr.shape}")
    if not np.all(np.isfinite(out)):
        raise InputError(f"{what} has non-finite entries")
    return out


def complex_from_json(obj) -> complex:
    return complex(_decode(obj, 0, "complex scalar"))


def vector_to_json(v) -> list:
    return [complex_to_json(z) for z in np.asarray(v).reshape(-1)]


def vector_from_json(obj) -> np.ndarray:
    return _decode(obj, 1, "vector")


def matrix_to_json(a) -> list:
    a = np.asarray(a, dtype=complex)
    return [[complex_to_json(z) for z in row] for row in a]


def matrix_from_json(obj) -> np.ndarray:
    return as_matrix(_decode(obj, 2, "matrix"))


def superop_to_json(phi: SuperOperator) -> dict:
    return {"n_in": phi.n_in, "n_out": phi.n_out, "kernel": matrix_to_json(phi.kernel)}


def superop_from_json(obj) -> SuperOperator:
    try:
        k = matrix_from_json(obj["kernel"])
        n_in = int(obj.get("n_in", round(np.sqrt(k.shape[1]))))
        n_out = int(obj.get("n_out", round(np.sqrt(k.shape[0]))))
    except (KeyError, TypeError, AttributeError) as exc:
        raise InputError(f"malformed superoperator: {exc}") from exc
    return SuperOperator(n_in, n_out, k)


def components_to_json(kernels: np.ndarray) -> list:
    return [[matrix_to_json(k) for k in row] for row in kernels]


def generator_to_json(phi, kind: str | None = None) -> dict:
    """Encode a :class:`StochGen` or a :class:`SchurActionMap` over k-hat."""
    if isinstance(phi, StochGen):
        n, d, kernels, kind = phi.n, phi.d, phi.kernels, kind or "stochastic"
    elif isinstance(phi, SchurActionMap):
        n, d, kernels, kind = phi.n, phi.m - 1, phi.kernels, kind or "global"
    else:
        raise InputError(f"cannot encode {type(phi).__name__}")
    return {"kind": kind, "n": n, "d": d, "components": components_to_json(kernels)}


def _components_from_json(obj) -> tuple:
    try:
        n = int(obj["n"])
        d = int(obj["d"])
        rows = obj["components"]
        if len(rows) != d + 1 or any(len(r) != d + 1 for r in rows):
            raise InputError(f"components must form a {d + 1} x {d + 1} array")
        kernels = np.array([[matrix_from_json(k) for k in row] for row in rows])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed generator: {exc}") from exc
    if kernels.shape != (d + 1, d + 1, n * n, n * n):
        raise InputError(f"component kernels have shape {kernels.shape[2:]}, expected ({n * n}, {n * n})")
    return n, d, kernels


def generator_from_json(obj) -> StochGen:
    n, d, kernels = _components_from_json(obj)
    return StochGen(n, d, kernels)


def global_from_json(obj) -> SchurActionMap:
    n, d, kernels = _components_from_json(obj)
    return SchurActionMap(n, d + 1, kernels)


def structure_data_to_json(s) -> dict:
    return {"pi": superop_to_json(s.pi), "l": matrix_to_json(s.l), "h": matrix_to_json(s.h)}


def structure_data_from_json(obj):
    from .generators import StructureData

    try:
        pi = superop_from_json(obj["pi"])
        l = matrix_from_json(obj["l"])
        h = matrix_from_json(obj["h"])
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed structure data: {exc}") from exc
    return StructureData(pi, l, h)

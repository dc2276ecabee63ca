"""Positivity analysis of superoperators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, OracleDisagreement
from .matrix_space import (
    TOL_PSD,
    SuperOperator,
    dagger,
    is_hermitian,
    op_norm,
)

CCP_ORACLE_TIMES = (1e-3, 1e-2, 1e-1)


def choi(phi: SuperOperator) -> np.ndarray:
    """C = sum_ij |i><j| (x) phi(|i><j|)."""
    n, m = phi.n_in, phi.n_out
    k4 = phi.kernel.reshape(m, m, n, n)  # [c, r, j, i]
    return k4.transpose(3, 1, 2, 0).reshape(n * m, n * m)


def _scaled_min_eig(c: np.ndarray) -> float:
    """Smallest eigenvalue of the hermitian part of c / max(1, ||c||)."""
    if c.size == 0:
        return 0.0
    c = c / max(1.0, op_norm(c))
    return float(np.linalg.eigvalsh((c + dagger(c)) / 2)[0])


def choi_min_eig(phi: SuperOperator) -> float:
    """Smallest eigenvalue of the Choi matrix, scaled to unit norm.

    Returns ``-inf`` when the Choi matrix is not hermitian.
    """
    c = choi(phi)
    if not is_hermitian(c):
        return -np.inf
    return _scaled_min_eig(c)


def is_completely_positive(phi: SuperOperator, tol: float = TOL_PSD) -> bool:
    return choi_min_eig(phi) >= -tol


def is_hermitian_map(phi: SuperOperator, tol: float = 1e-12) -> bool:
    """True iff phi(a*) = phi(a)* on every matrix unit, entrywise within ``tol``."""
    return hermitian_map_defect(phi) <= tol


def hermitian_map_defect(phi: SuperOperator) -> float:
    return phi.dagger().distance(phi)


def _omega_projector(n: int) -> np.ndarray:
    omega = np.eye(n).reshape(-1)
    return np.eye(n * n) - np.outer(omega, omega) / n


def ccp_compressed_choi(L: SuperOperator, tol: float = TOL_PSD):
    """Compressed Choi test: Q choi(L) Q >= -tol with Q = I - |Omega><Omega|/n.

    :returns: ``(ok, scaled_min_eig)``
    """
    _require_hermitian_preserving(L)
    q = _omega_projector(L.n_in)
    lam = _scaled_min_eig(q @ choi(L) @ q)
    return lam >= -tol, lam


def ccp_exp_oracle(L: SuperOperator, tol: float = TOL_PSD, times=CCP_ORACLE_TIMES):
    """Small-time oracle: choi(exp(tL)) >= -10 tol for each t in ``times``.

    :returns: ``(ok, worst scaled min eig over times)``
    """
    _require_hermitian_preserving(L)
    worst = min(_scaled_min_eig(choi(L.exp(t))) for t in times)
    return worst >= -10 * tol, worst


@dataclass
class CCPReport:
    compressed_ok: bool
    compressed_min_eig: float
    oracle_ok: bool
    oracle_min_eig: float
    tol: float

    @property
    def agree(self) -> bool:
        return self.compressed_ok == self.oracle_ok

    def to_dict(self) -> dict:
        return {
            "compressed_ok": self.compressed_ok,
            "compressed_min_eig": self.compressed_min_eig,
            "oracle_ok": self.oracle_ok,
            "oracle_min_eig": self.oracle_min_eig,
            "agree": self.agree,
            "tol": self.tol,
        }


def ccp_report(L: SuperOperator, tol: float = TOL_PSD) -> CCPReport:
    c_ok, c_lam = ccp_compressed_choi(L, tol)
    o_ok, o_lam = ccp_exp_oracle(L, tol)
    return CCPReport(c_ok, c_lam, o_ok, o_lam, tol)


def is_conditionally_cp(L: SuperOperator, tol: float = TOL_PSD) -> bool:
    """CCP test by compressed Choi matrix, cross-checked by the exp oracle.

    Raises :class:`OracleDisagreement` if the two characterizations differ.
    """
    rep = ccp_report(L, tol)
    if not rep.agree:
        raise OracleDisagreement(
            "compressed-Choi and exp-oracle CCP tests disagree "
            f"(compressed {rep.compressed_min_eig:.3e}, oracle {rep.oracle_min_eig:.3e})"
        )
    return rep.compressed_ok


def _require_hermitian_preserving(L: SuperOperator, tol: float = 1e-12):
    if L.n_in != L.n_out:
        raise InputError("generator must map M_n into itself")
    defect = hermitian_map_defect(L)
    if defect > tol * max(1.0, float(np.max(np.abs(L.kernel))) if L.kernel.size else 1.0):
        raise InputError(f"map is not hermitian-preserving (defect {defect:.3e})")


def operator_norm(phi: SuperOperator, kind: str = "auto"):
    """Norm of a superoperator.

    ``kind="kernel"`` is the largest singular value of the kernel.
    ``kind="auto"`` uses ||phi(1)||, the exact operator norm of a completely
    positive map, when phi passes the CP test, and the kernel norm otherwise.

    :returns: ``(value, kind_used)``
    """
    if kind not in ("auto", "kernel", "cp"):
        raise InputError(f"unknown norm kind {kind!r}")
    if kind == "cp" or (kind == "auto" and phi.n_in == phi.n_out and is_completely_positive(phi)):
        return op_norm(phi(np.eye(phi.n_in))), "cp"
    return op_norm(phi.kernel), "kernel"


@dataclass
class GrowthBound:
    beta: float
    per_t: dict = field(default_factory=dict)
    norm_kinds: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "per_t": [{"t": t, "rate": r, "norm": self.norm_kinds[t]} for t, r in self.per_t.items()],
        }


def growth_bound(L: SuperOperator, t_grid, kind: str = "auto") -> GrowthBound:
    """Estimate the exponential growth bound as max_t log||exp(tL)|| / t."""
    ts = [float(t) for t in t_grid]
    if not ts:
        raise InputError("t_grid must be nonempty")
    if any(not np.isfinite(t) or t <= 0 for t in ts):
        raise InputError("t_grid entries must be positive")
    per_t, kinds = {}, {}
    for t in ts:
        value, used = operator_norm(L.exp(t), kind)
        per_t[t] = np.log(value) / t if value > 0 else -np.inf
        kinds[t] = used
    return GrowthBound(max(per_t.values()), per_t, kinds)


"""Dense matrix-space algebra over k-hat = C + C^d.

Conventions used throughout the package:

* ``vec`` stacks columns, so ``vec(A X B) = kron(B.T, A) @ vec(X)``.
* A tensor ``a (x) E`` with ``a`` in M_n and ``E`` in M_m is ``np.kron(a, E)``;
  block ``(i, j)`` of an operator ``T`` on C^n (x) C^m is ``T[i::m, j::m]``.
* The k-hat basis is indexed ``0..d`` with ``e_0`` the vacuum direction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import InputError

TOL_PSD = 1e-10
TOL_HERM_REL = 1e-12


# --------------------------------------------------------------------------
# plain matrix helpers


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D complex array or raise :class:`InputError`."""
    arr = np.asarray(a, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise InputError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite entries")
    return arr


def vec(a: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`."""
    cols = rows if cols is None else cols
    return np.asarray(v).reshape((rows, cols), order="F")


def matrix_unit(n: int, i: int, j: int, m: int | None = None) -> np.ndarray:
    """The matrix unit |e_i><e_j| of shape (n, m)."""
    out = np.zeros((n, n if m is None else m), dtype=complex)
    out[i, j] = 1.0
    return out


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(a))


def op_norm(a: np.ndarray) -> float:
    """Operator norm (largest singular value)."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def hermitian_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - dagger(a)))) if a.size else 0.0


def is_hermitian(a: np.ndarray, tol: float | None = None) -> bool:
    """Hermiticity test with default tolerance ``1e-12 * ||a||``."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    if tol is None:
        tol = TOL_HERM_REL * max(op_norm(a), 1.0)
    return hermitian_defect(a) <= tol


def hermitian_eigvalsh(a: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Eigenvalues of a hermitian matrix, computed on ``(a + a*)/2``.

    Raises :class:`InputError` if ``a`` fails the hermiticity check.
    """
    a = as_matrix(a)
    if not is_hermitian(a, tol):
        raise InputError(
            f"matrix is not hermitian (defect {hermitian_defect(a):.3e})"
        )
    return np.linalg.eigvalsh((a + dagger(a)) / 2)


def min_eig(a: np.ndarray, tol: float | None = None) -> float:
    """Smallest eigenvalue of a hermitian matrix (0 for empty input)."""
    if np.asarray(a).size == 0:
        return 0.0
    return float(hermitian_eigvalsh(a, tol)[0])


def psd_gap(a: np.ndarray, b: np.ndarray) -> float:
    """Scaled smallest eigenvalue of ``b - a``.

    The difference is divided by ``max(1, ||a||, ||b||)`` so that the result
    can be compared with an absolute tolerance.
    """
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    if a.shape != b.shape:
        raise InputError(f"shape mismatch {a.shape} vs {b.shape}")
    for name, m in (("A", a), ("B", b)):
        if not is_hermitian(m):
            raise InputError(f"{name} is not hermitian (defect {hermitian_defect(m):.3e})")
    scale = max(1.0, op_norm(a), op_norm(b))
    diff = (b - a) / scale
    return float(np.linalg.eigvalsh((diff + dagger(diff)) / 2)[0])


def psd_leq(a: np.ndarray, b: np.ndarray, tol: float = TOL_PSD) -> bool:
    """Loewner order test ``a <= b`` up to ``tol``."""
    return psd_gap(a, b) >= -tol


# --------------------------------------------------------------------------
# superoperators


def _permutation_transpose(n: int) -> np.ndarray:
    """Index permutation p with vec(a.T)[k] = vec(a)[p[k]] for n x n matrices."""
    idx = np.arange(n * n).reshape((n, n), order="F")
    return vec(idx.T)


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """Linear map M_{n_in} -> M_{n_out} stored as a matrix on column-stacked inputs."""

    n_in: int
    n_out: int
    kernel: np.ndarray

    def __post_init__(self):
        k = as_matrix(self.kernel, "kernel")
        if k.shape != (self.n_out**2, self.n_in**2):
            raise InputError(
                f"kernel shape {k.shape} does not match ({self.n_out**2}, {self.n_in**2})"
            )
        k = k.copy()
        k.setflags(write=False)
        object.__setattr__(self, "kernel", k)

    # constructors -------------------------------------------------------
    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], n_in: int, n_out: int | None = None):
        """Tabulate a linear function on the matrix units of M_{n_in}."""
        n_out = n_in if n_out is None else n_out
        kernel = np.empty((n_out**2, n_in**2), dtype=complex)
        for j in range(n_in):
            for i in range(n_in):
                img = as_matrix(f(matrix_unit(n_in, i, j)), "image")
                if img.shape != (n_out, n_out):
                    raise InputError(f"image shape {img.shape}, expected ({n_out}, {n_out})")
                kernel[:, j * n_in + i] = vec(img)
        return cls(n_in, n_out, kernel)

    @classmethod
    def identity(cls, n: int):
        return cls(n, n, np.eye(n * n))

    @classmethod
    def zero(cls, n_in: int, n_out: int | None = None):
        n_out = n_in if n_out is None else n_out
        return cls(n_in, n_out, np.zeros((n_out**2, n_in**2)))

    @classmethod
    def conjugation(cls, x: np.ndarray, y: np.ndarray | None = None):
        """The map a -> x a y (default ``y = x*``)."""
        x = as_matrix(x, "x")
        y = dagger(x) if y is None else as_matrix(y, "y")
        if x.shape[1] != y.shape[0] or x.shape[0] != y.shape[1]:
            raise InputError("x and y have incompatible shapes")
        return cls(x.shape[1], x.shape[0], np.kron(y.T, x))

    @classmethod
    def kraus(cls, ops: Iterable[np.ndarray]):
        """a -> sum_i v_i a v_i*."""
        ops = [as_matrix(v, "Kraus operator") for v in ops]
        if not ops:
            raise InputError("at least one Kraus operator is required")
        kernel = sum(np.kron(np.conj(v), v) for v in ops)
        return cls(ops[0].shape[1], ops[0].shape[0], kernel)

    @classmethod
    def transpose_map(cls, n: int):
        k = np.eye(n * n)[_permutation_transpose(n)]
        return cls(n, n, k)

    @classmethod
    def commutator(cls, h: np.ndarray):
        """a -> [h, a]."""
        h = as_matrix(h, "h")
        n = h.shape[0]
        return cls(n, n, np.kron(np.eye(n), h) - np.kron(h.T, np.eye(n)))

    # action ---------------------------------------------------------------
    def apply(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=complex)
        if a.shape != (self.n_in, self.n_in):
            raise InputError(f"input shape {a.shape}, expected ({self.n_in}, {self.n_in})")
        return unvec(self.kernel @ vec(a), self.n_out)

    __call__ = apply

    def apply_many(self, stack: np.ndarray) -> np.ndarray:
        """Apply to a stack of shape (..., n_in, n_in)."""
        stack = np.asarray(stack, dtype=complex)
        lead = stack.shape[:-2]
        flat = np.swapaxes(stack, -1, -2).reshape(-1, self.n_in**2)
        out = flat @ self.kernel.T
        out = out.reshape(lead + (self.n_out, self.n_out))
        return np.swapaxes(out, -1, -2)

    def images_of_units(self) -> np.ndarray:
        """Array ``P`` with ``P[i, j] = self(|i><j|)``."""
        n, m = self.n_in, self.n_out
        k4 = self.kernel.reshape(m, m, n, n)  # [c, r, j, i]
        return k4.transpose(3, 2, 1, 0)

    # algebra --------------------------------------------------------------
    def _check_same(self, other: "SuperOperator"):
        if not isinstance(other, SuperOperator):
            return NotImplemented
        if (self.n_in, self.n_out) != (other.n_in, other.n_out):
            raise InputError("superoperator dimensions differ")
        return None

    def __add__(self, other):
        if self._check_same(other) is NotImplemented:
            return NotImplemented
        return SuperOperator(self.n_in, self.n_out, self.kernel + other.kernel)

    def __sub__(self, other):
        if self._check_same(other) is NotImplemented:
            return NotImplemented
        return SuperOperator(self.n_in, self.n_out, self.kernel - other.kernel)

    def __neg__(self):
        return SuperOperator(self.n_in, self.n_out, -self.kernel)

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return SuperOperator(self.n_in, self.n_out, c * self.kernel)

    __rmul__ = __mul__

    def __matmul__(self, other: "SuperOperator") -> "SuperOperator":
        """Composition: ``(self @ other)(a) = self(other(a))``."""
        if not isinstance(other, SuperOperator):
            return NotImplemented
        if other.n_out != self.n_in:
            raise InputError("cannot compose: dimensions do not chain")
        return SuperOperator(other.n_in, self.n_out, self.kernel @ other.kernel)

    compose = __matmul__

    def dagger(self) -> "SuperOperator":
        """The map a -> self(a*)*."""
        p_in = _permutation_transpose(self.n_in)
        p_out = _permutation_transpose(self.n_out)
        k = np.conj(self.kernel)[p_out][:, p_in]
        return SuperOperator(self.n_in, self.n_out, k)

    def exp(self, t: float = 1.0) -> "SuperOperator":
        """Matrix exponential of ``t`` times the kernel (scaling and squaring)."""
        if self.n_in != self.n_out:
            raise InputError("exponential needs a map of M_n into itself")
        return SuperOperator(self.n_in, self.n_in, expm(t * self.kernel))

    def distance(self, other: "SuperOperator") -> float:
        """Largest absolute kernel entry of the difference."""
        self._check_same(other)
        if self.kernel.size == 0:
            return 0.0
        return float(np.max(np.abs(self.kernel - other.kernel)))


def ampliate(phi: SuperOperator, m: int) -> SuperOperator:
    """The lifting phi (x) id_{M_m} on M_n (x) M_m."""
    blocks_map = np.empty((m, m), dtype=object)
    for i in range(m):
        for j in range(m):
            blocks_map[i, j] = phi
    return SchurActionMap.from_components(blocks_map).to_superoperator()


# --------------------------------------------------------------------------
# blocks


def to_blocks(t: np.ndarray, m: int) -> np.ndarray:
    """Split an operator on C^n (x) C^m into the array ``B[i, j] = T^i_j`` (n x n)."""
    t = np.asarray(t)
    nm = t.shape[0]
    if t.shape != (nm, nm) or nm % m:
        raise InputError(f"shape {t.shape} is not square with size divisible by {m}")
    n = nm // m
    return t.reshape(n, m, n, m).transpose(1, 3, 0, 2)


def to_blocks_rect(t: np.ndarray, m_rows: int, m_cols: int) -> np.ndarray:
    t = np.asarray(t)
    r, c = t.shape
    if r % m_rows or c % m_cols:
        raise InputError("shape not divisible by block counts")
    return t.reshape(r // m_rows, m_rows, c // m_cols, m_cols).transpose(1, 3, 0, 2)


def from_blocks(b: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_blocks` (works for rectangular block arrays too)."""
    b = np.asarray(b)
    mr, mc, n1, n2 = b.shape
    return b.transpose(2, 0, 3, 1).reshape(n1 * mr, n2 * mc)


def embed_ket(n: int, m: int, alpha: int) -> np.ndarray:
    """E_alpha = I_n (x) |e_alpha>, shape (n m, n)."""
    e = np.zeros((m, 1))
    e[alpha, 0] = 1.0
    return np.kron(np.eye(n), e)


# --------------------------------------------------------------------------
# Schur products and isometries


def schur_product(a: np.ndarray, b: np.ndarray, m: int) -> np.ndarray:
    """Blockwise product: block (i, j) of the result is A^i_j B^i_j."""
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    if a.shape != b.shape:
        raise InputError(f"shape mismatch {a.shape} vs {b.shape}")
    ba, bb = to_blocks(a, m), to_blocks(b, m)
    return from_blocks(np.einsum("ijab,ijbc->ijac", ba, bb))


def schur_isometry(m: int) -> np.ndarray:
    """S: C^m -> C^m (x) C^m with S e_i = e_i (x) e_i."""
    if int(m) != m or m < 1:
        raise InputError("m must be a positive integer")
    s = np.zeros((m * m, m))
    s[np.arange(m) * (m + 1), np.arange(m)] = 1.0
    return s


def sigma(t: np.ndarray) -> np.ndarray:
    """Sigma(T) = S T S*."""
    t = as_matrix(t, "T")
    if t.shape[0] != t.shape[1]:
        raise InputError("T must be square")
    s = schur_isometry(t.shape[0])
    return s @ t @ s.T


def upsilon(r: np.ndarray) -> np.ndarray:
    """Upsilon(R) = S* R S, the left inverse of :func:`sigma`."""
    r = as_matrix(r, "R")
    m = int(round(np.sqrt(r.shape[0])))
    if r.shape != (m * m, m * m):
        raise InputError(f"R must be m^2 x m^2, got {r.shape}")
    s = schur_isometry(m)
    return s.T @ r @ s


def sigma_upsilon(t: np.ndarray, r: np.ndarray | None = None):
    """Return ``(sigma(t), upsilon(r))``; ``r`` defaults to ``sigma(t)``."""
    st = sigma(t)
    return st, upsilon(st if r is None else r)


# --------------------------------------------------------------------------
# Schur-action maps


@dataclass(frozen=True, eq=False)
class SchurActionMap:
    """Blockwise map on M_n (x) M_m; ``kernels[i, j]`` acts on block (i, j)."""

    n: int
    m: int
    kernels: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kernels, dtype=complex)
        if k.shape != (self.m, self.m, self.n**2, self.n**2):
            raise InputError(f"component kernel array has shape {k.shape}")
        if not np.all(np.isfinite(k)):
            raise InputError("component kernels have non-finite entries")
        k = k.copy()
        k.setflags(write=False)
        object.__setattr__(self, "kernels", k)

    @classmethod
    def from_components(cls, comps: Sequence[Sequence[SuperOperator]]):
        comps = np.asarray(comps, dtype=object)
        m = comps.shape[0]
        if comps.shape != (m, m):
            raise InputError("components must form a square array")
        n = comps[0, 0].n_in
        kernels = np.empty((m, m, n * n, n * n), dtype=complex)
        for i in range(m):
            for j in range(m):
                c = comps[i, j]
                if (c.n_in, c.n_out) != (n, n):
                    raise InputError("all components must map M_n to M_n")
                kernels[i, j] = c.kernel
        return cls(n, m, kernels)

    @classmethod
    def identity(cls, n: int, m: int):
        k = np.broadcast_to(np.eye(n * n), (m, m, n * n, n * n))
        return cls(n, m, k)

    @classmethod
    def zero(cls, n: int, m: int):
        return cls(n, m, np.zeros((m, m, n * n, n * n)))

    @classmethod
    def from_superoperator(cls, phi: SuperOperator, m: int):
        """Read off components of a kappa-decomposable map (no check)."""
        n = phi.n_in // m
        if phi.n_in != n * m or phi.n_out != phi.n_in:
            raise InputError("superoperator is not square on M_n (x) M_m")
        # output index (v m + j) * n m + (u m + i); input (y m + j) * n m + (x m + i)
        k = phi.kernel.reshape(n, m, n, m, n, m, n, m)  # v j u i | y j' x i'
        diag = np.einsum("vjuiyjxi->ijvuyx", k)
        return cls(n, m, diag.reshape(m, m, n * n, n * n))

    def component(self, i: int, j: int) -> SuperOperator:
        return SuperOperator(self.n, self.n, self.kernels[i, j])

    def apply(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=complex)
        if t.shape != (self.n * self.m, self.n * self.m):
            raise InputError(f"input shape {t.shape} does not match n*m = {self.n * self.m}")
        b = to_blocks(t, self.m)
        vb = np.swapaxes(b, -1, -2).reshape(self.m, self.m, -1)
        out = np.einsum("ijpq,ijq->ijp", self.kernels, vb)
        out = np.swapaxes(out.reshape(self.m, self.m, self.n, self.n), -1, -2)
        return from_blocks(out)

    __call__ = apply

    def to_superoperator(self) -> SuperOperator:
        n, m = self.n, self.m
        k = self.kernels.reshape(m, m, n, n, n, n)  # i j | v u | y x
        big = np.zeros((n, m, n, m, n, m, n, m), dtype=complex)
        for i in range(m):
            for j in range(m):
                big[:, j, :, i, :, j, :, i] = k[i, j]
        return SuperOperator(n * m, n * m, big.reshape((n * m) ** 2, (n * m) ** 2))

    def exp(self, t: float) -> "SchurActionMap":
        k = np.empty_like(self.kernels)
        for i in range(self.m):
            for j in range(self.m):
                k[i, j] = expm(t * self.kernels[i, j])
        return SchurActionMap(self.n, self.m, k)

    def distance(self, other: "SchurActionMap") -> float:
        if (self.n, self.m) != (other.n, other.m):
            raise InputError("Schur-action maps have different shapes")
        if self.kernels.size == 0:
            return 0.0
        return float(np.max(np.abs(self.kernels - other.kernels)))

    def __add__(self, other):
        if not isinstance(other, SchurActionMap):
            return NotImplemented
        if (self.n, self.m) != (other.n, other.m):
            raise InputError("Schur-action maps have different shapes")
        return SchurActionMap(self.n, self.m, self.kernels + other.kernels)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return SchurActionMap(self.n, self.m, c * self.kernels)

    __rmul__ = __mul__


def is_kappa_decomposable(phi: SuperOperator, m: int, tol: float = 1e-12):
    """Check p_i Phi(T) p_j = Phi(p_i T p_j) on all matrix units T.

    For a matrix unit T lying in block (i, j) the condition says that Phi(T)
    lives in block (i, j) only, so the worst violation is the largest
    Frobenius norm of the part of Phi(T) outside that block.

    :returns: ``(ok, worst)``
    """
    nm = phi.n_in
    if phi.n_out != nm or nm % m:
        raise InputError("Phi must act on M_n (x) M_m")
    n = nm // m
    k = phi.kernel.reshape(n, m, n, m, n, m, n, m)  # out: v j' u i'  in: y j x i
    own = np.zeros((1, m, 1, m, 1, m, 1, m), dtype=bool)
    for i in range(m):
        for j in range(m):
            own[0, j, 0, i, 0, j, 0, i] = True
    outside = np.where(own, 0.0, k)
    cols = outside.reshape(nm * nm, nm * nm)
    worst = float(np.max(np.linalg.norm(cols, axis=0))) if cols.size else 0.0
    return worst <= tol, worst


def schur_extension(phi: SuperOperator, m: int) -> SchurActionMap:
    """Components E^{e_i} phi(.) E_{e_j} of a map M_n -> M_n (x) M_m."""
    n = phi.n_in
    if phi.n_out != n * m:
        raise InputError(f"phi must map M_{n} into M_{n * m}")
    k = phi.kernel.reshape(n, m, n, m, n * n)  # v j u i | input
    comps = k.transpose(3, 1, 0, 2, 4).reshape(m, m, n * n, n * n)
    return SchurActionMap(n, m, comps)


# --------------------------------------------------------------------------
# truncation operators


@dataclass(frozen=True)
class TruncationSet:
    """J = {0} u J0 with J0 a subset of {1..d}."""

    d: int
    selected: frozenset = frozenset()

    def __post_init__(self):
        sel = frozenset(int(i) for i in self.selected)
        if self.d < 0:
            raise InputError("noise dimension must be non-negative")
        if any(i < 1 or i > self.d for i in sel):
            raise InputError(f"selected indices must lie in 1..{self.d}")
        object.__setattr__(self, "selected", sel)

    @property
    def indices(self) -> tuple:
        return (0,) + tuple(sorted(self.selected))

    @classmethod
    def full(cls, d: int):
        return cls(d, frozenset(range(1, d + 1)))

    @classmethod
    def all_sets(cls, d: int):
        """Every truncation set over noise dimension d."""
        for mask in range(2**d):
            yield cls(d, frozenset(i + 1 for i in range(d) if mask >> i & 1))


@dataclass(frozen=True)
class TruncationOperators:
    C_J0: np.ndarray
    C_J: np.ndarray
    box: np.ndarray
    Delta: np.ndarray
    Q: np.ndarray
    A: np.ndarray
    B: np.ndarray
    B_inv: np.ndarray


def truncation_operators(J: TruncationSet) -> TruncationOperators:
    d = J.d
    c0 = np.zeros(d)
    for i in J.selected:
        c0[i - 1] = 1.0
    q0 = np.diag(c0)
    c = np.concatenate(([1.0], c0))
    box = np.outer(c, c)
    delta = np.zeros((d + 1, d + 1))
    delta[1:, 1:] = q0
    q = delta.copy()
    q[0, 0] = 1.0
    a = np.zeros((d + 1, d + 1))
    a[0, 1:] = -0.5 * c0
    a[1:, 0] = -0.5 * c0
    a[1:, 1:] = q0 - np.outer(c0, c0)
    b = np.eye(d + 1)
    b[0, 1:] = -c0
    b_inv = np.eye(d + 1)
    b_inv[0, 1:] = c0
    return TruncationOperators(c0, c, box, delta, q, a, b, b_inv)


def box_Jt(J: TruncationSet, t: float) -> np.ndarray:
    """[1; e^{-t/2} C_J0][...]* + (1 - e^{-t}) Delta_J."""
    if not np.isfinite(t) or t < 0:
        raise InputError("t must be a finite non-negative time")
    ops = truncation_operators(J)
    v = np.concatenate(([1.0], np.exp(-t / 2) * ops.C_J0))
    return np.outer(v, v) + (1 - np.exp(-t)) * ops.Delta

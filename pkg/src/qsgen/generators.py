"""Stochastic generators and their transforms.

A stochastic generator on M_n with noise dimension d is a map
phi: M_n -> M_n (x) M_{d+1}.  It is stored by its components
``phi^alpha_beta = E^{e_alpha} phi(.) E_{e_beta}``, alpha, beta in 0..d.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cp_analysis import choi_min_eig, hermitian_map_defect
from .errors import InputError
from .matrix_space import (
    TOL_PSD,
    SchurActionMap,
    SuperOperator,
    TruncationSet,
    as_matrix,
    dagger,
    embed_ket,
    is_kappa_decomposable,
    matrix_unit,
    op_norm,
    schur_extension,
    truncation_operators,
    vec,
)


# --------------------------------------------------------------------------
# k-hat helpers


def noise_vector(x, d: int | None = None) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise InputError("noise vector must be a finite 1-D array")
    if d is not None and x.shape[0] != d:
        raise InputError(f"noise vector has dimension {x.shape[0]}, expected {d}")
    return x


def hat(x) -> np.ndarray:
    """x-hat = (1, x) in k-hat."""
    return np.concatenate(([1.0 + 0j], noise_vector(x)))


def vacuum_projection(d: int) -> np.ndarray:
    """|e_0><e_0| on k-hat."""
    p = np.zeros((d + 1, d + 1))
    p[0, 0] = 1.0
    return p


def ito_projection(d: int) -> np.ndarray:
    """Delta: projection of k-hat onto the noise part."""
    return np.diag(np.concatenate(([0.0], np.ones(d))))


def noise_embeddings(n: int, d: int):
    """(E0, Ek): E0 = I_n (x) |e_0> and Ek = I_n (x) [0; I_d]."""
    e0 = embed_ket(n, d + 1, 0)
    ek = np.kron(np.eye(n), np.vstack([np.zeros((1, d)), np.eye(d)]))
    return e0, ek


def chi(x, y) -> complex:
    """chi(x, y) = |x|^2/2 + |y|^2/2 - <x, y>."""
    x = noise_vector(x)
    y = noise_vector(y)
    if x.shape != y.shape:
        raise InputError("noise vectors have different dimensions")
    return 0.5 * np.vdot(x, x).real + 0.5 * np.vdot(y, y).real - np.vdot(x, y)


def basis_gamma(d: int) -> np.ndarray:
    """The map eta: alpha -> d_alpha with d_0 = 0 and d_i the i-th basis vector."""
    return np.vstack([np.zeros((1, d)), np.eye(d)]).astype(complex)


def gamma_map(values, d: int | None = None) -> np.ndarray:
    g = np.asarray(values, dtype=complex)
    if g.ndim == 1 and d is not None:
        g = g.reshape(-1, d)
    if g.ndim != 2 or g.shape[0] < 1:
        raise InputError("Gamma must be a nonempty (m, d) array")
    if d is not None and g.shape[1] != d:
        raise InputError(f"Gamma values have dimension {g.shape[1]}, expected {d}")
    if not np.all(np.isfinite(g)):
        raise InputError("Gamma has non-finite entries")
    return g


def tensor_right(mat: np.ndarray, n: int) -> SuperOperator:
    """a -> a (x) mat, from M_n."""
    mat = as_matrix(mat, "mat")
    k = mat.shape[0]
    return SuperOperator.from_function(lambda a: np.kron(a, mat), n, n * k)


# --------------------------------------------------------------------------
# stochastic generators


@dataclass(frozen=True, eq=False)
class StochGen:
    """phi: M_n -> M_n (x) M_{d+1}; ``kernels[alpha, beta]`` is phi^alpha_beta."""

    n: int
    d: int
    kernels: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kernels, dtype=complex)
        m = self.d + 1
        if self.n < 1 or self.d < 0:
            raise InputError("need n >= 1 and d >= 0")
        if k.shape != (m, m, self.n**2, self.n**2):
            raise InputError(f"component array has shape {k.shape}")
        if not np.all(np.isfinite(k)):
            raise InputError("components have non-finite entries")
        k = k.copy()
        k.setflags(write=False)
        object.__setattr__(self, "kernels", k)

    @classmethod
    def zero(cls, n: int, d: int):
        return cls(n, d, np.zeros((d + 1, d + 1, n * n, n * n)))

    @classmethod
    def from_components(cls, comps):
        comps = np.asarray(comps, dtype=object)
        s = SchurActionMap.from_components(comps)
        return cls(s.n, s.m - 1, s.kernels)

    @classmethod
    def from_superoperator(cls, phi: SuperOperator, d: int):
        s = schur_extension(phi, d + 1)
        return cls(s.n, d, s.kernels)

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], n: int, d: int):
        return cls.from_superoperator(SuperOperator.from_function(f, n, n * (d + 1)), d)

    def component(self, alpha: int, beta: int) -> SuperOperator:
        return SuperOperator(self.n, self.n, self.kernels[alpha, beta])

    def assemble(self, a: np.ndarray) -> np.ndarray:
        """sum_{alpha beta} phi^alpha_beta(a) (x) |e_alpha><e_beta|."""
        a = np.asarray(a, dtype=complex)
        if a.shape != (self.n, self.n):
            raise InputError(f"input shape {a.shape}, expected ({self.n}, {self.n})")
        m = self.d + 1
        comps = (self.kernels @ vec(a)).reshape(m, m, self.n, self.n)
        comps = np.swapaxes(comps, -1, -2)
        return comps.transpose(2, 0, 3, 1).reshape(self.n * m, self.n * m)

    __call__ = assemble

    def as_superoperator(self) -> SuperOperator:
        n, m = self.n, self.d + 1
        k = self.kernels.reshape(m, m, n, n, n * n).transpose(2, 1, 3, 0, 4)
        return SuperOperator(n, n * m, k.reshape((n * m) ** 2, n * n))

    def as_schur_map(self) -> SchurActionMap:
        return SchurActionMap(self.n, self.d + 1, self.kernels)

    def dagger(self) -> "StochGen":
        """phi-dagger: a -> phi(a*)*."""
        return StochGen.from_superoperator(self.as_superoperator().dagger(), self.d)

    def distance(self, other: "StochGen") -> float:
        if (self.n, self.d) != (other.n, other.d):
            raise InputError("generators have different shapes")
        return float(np.max(np.abs(self.kernels - other.kernels)))

    def __add__(self, other):
        if not isinstance(other, StochGen):
            return NotImplemented
        if (self.n, self.d) != (other.n, other.d):
            raise InputError("generators have different shapes")
        return StochGen(self.n, self.d, self.kernels + other.kernels)

    def __sub__(self, other):
        if not isinstance(other, StochGen):
            return NotImplemented
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return StochGen(self.n, self.d, c * self.kernels)

    __rmul__ = __mul__


def delta_perp(n: int, d: int) -> StochGen:
    """a -> a (x) |e_0><e_0|."""
    k = np.zeros((d + 1, d + 1, n * n, n * n))
    k[0, 0] = np.eye(n * n)
    return StochGen(n, d, k)


# --------------------------------------------------------------------------
# associated generators and the component transforms


def phi_xy(phi: StochGen, x, y) -> SuperOperator:
    """sum conj(x-hat_alpha) y-hat_beta phi^alpha_beta - chi(x, y) id."""
    x = noise_vector(x, phi.d)
    y = noise_vector(y, phi.d)
    coeff = np.outer(np.conj(hat(x)), hat(y))
    k = np.einsum("ab,abpq->pq", coeff, phi.kernels) - chi(x, y) * np.eye(phi.n**2)
    return SuperOperator(phi.n, phi.n, k)


def schur_generator(phi: StochGen, gamma) -> SchurActionMap:
    """Schur-action map with components phi_{Gamma(alpha), Gamma(beta)}."""
    g = gamma_map(gamma, phi.d)
    m = g.shape[0]
    k = np.empty((m, m, phi.n**2, phi.n**2), dtype=complex)
    for a in range(m):
        for b in range(m):
            k[a, b] = phi_xy(phi, g[a], g[b]).kernel
    return SchurActionMap(phi.n, m, k)


def forward_transform(phi: StochGen) -> SchurActionMap:
    """Components of the global eta-generator, varphi^alpha_beta = phi_{d_alpha, d_beta}."""
    k = phi.kernels
    d = phi.d
    ident = np.eye(phi.n**2)
    out = np.empty_like(k)
    out[0, 0] = k[0, 0]
    for i in range(1, d + 1):
        out[i, 0] = k[0, 0] + k[i, 0] - 0.5 * ident
        out[0, i] = k[0, 0] + k[0, i] - 0.5 * ident
    for i in range(1, d + 1):
        for j in range(1, d + 1):
            out[i, j] = k[0, 0] + k[i, 0] + k[0, j] + k[i, j] + ((i == j) - 1.0) * ident
    return SchurActionMap(phi.n, d + 1, out)


def inverse_transform(varphi: SchurActionMap) -> StochGen:
    """Exact inverse of :func:`forward_transform` on component arrays."""
    k = varphi.kernels
    d = varphi.m - 1
    ident = np.eye(varphi.n**2)
    out = np.empty_like(k)
    out[0, 0] = k[0, 0]
    for i in range(1, d + 1):
        out[i, 0] = k[i, 0] - k[0, 0] + 0.5 * ident
        out[0, i] = k[0, i] - k[0, 0] + 0.5 * ident
    for i in range(1, d + 1):
        for j in range(1, d + 1):
            out[i, j] = k[i, j] - k[i, 0] - k[0, j] + k[0, 0] - (i == j) * ident
    return StochGen(varphi.n, d, out)


def truncated_inverse(varphi_full, J: TruncationSet, tol: float = 1e-12) -> SuperOperator:
    """The truncation a -> (I(x)B_J)* (varphi(a (x) box_J) - a (x) A_J) (I(x)B_J).

    ``varphi_full`` is a kappa-decomposable map on M_n (x) M_{d+1}, given as a
    :class:`SuperOperator` or :class:`SchurActionMap`.  The result maps
    M_n -> M_n (x) M_{d+1}.
    """
    m = J.d + 1
    if isinstance(varphi_full, SchurActionMap):
        if varphi_full.m != m:
            raise InputError("index set size does not match the truncation set")
        varphi_full = varphi_full.to_superoperator()
    if varphi_full.n_in % m:
        raise InputError("map dimension is not a multiple of d + 1")
    ok, worst = is_kappa_decomposable(varphi_full, m, tol)
    if not ok:
        raise InputError(f"map is not kappa-decomposable (violation {worst:.3e})")
    n = varphi_full.n_in // m
    ops = truncation_operators(J)
    ib = np.kron(np.eye(n), ops.B)
    inner = varphi_full @ tensor_right(ops.box, n) - tensor_right(ops.A, n)
    return SuperOperator.conjugation(dagger(ib), ib) @ inner


def compress_truncation(phi: StochGen, J: TruncationSet) -> SuperOperator:
    """a -> Q_J phi(a) Q_J with Q_J ampliated."""
    q = np.kron(np.eye(phi.n), truncation_operators(J).Q)
    return SuperOperator.conjugation(q) @ phi.as_superoperator()


# --------------------------------------------------------------------------
# Weyl coefficient, flow generator and the lifted generator


def _gamma_column(g: np.ndarray) -> np.ndarray:
    """L: C^m -> C^m (x) k with L e_alpha = e_alpha (x) Gamma(alpha)."""
    m, d = g.shape
    L = np.zeros((m * d, m), dtype=complex)
    for a in range(m):
        L[a * d:(a + 1) * d, a] = g[a]
    return L


def weyl_coefficient(gamma) -> np.ndarray:
    """F_Gamma = [[-L*L/2, -L*], [L, 0]] on C^m (x) k-hat."""
    g = gamma_map(gamma)
    m, d = g.shape
    L = _gamma_column(g)
    e0, ek = noise_embeddings(m, d)
    return e0 @ (-0.5 * dagger(L) @ L) @ e0.T - e0 @ dagger(L) @ ek.T + ek @ L @ e0.T


def flow_generator(gamma) -> StochGen:
    """Theta(T) = F*(T (x) I) + (T (x) I) F + F*(T (x) Delta) F on M_m."""
    g = gamma_map(gamma)
    m, d = g.shape
    F = weyl_coefficient(g)
    Fs = dagger(F)
    ident = np.eye(d + 1)
    delta = ito_projection(d)

    def theta(t):
        ti = np.kron(t, ident)
        return Fs @ ti + ti @ F + Fs @ np.kron(t, delta) @ F

    return StochGen.from_function(theta, m, d)


def lift_generator(phi: StochGen, gamma) -> StochGen:
    """Phi_Gamma = (id (x) upsilon_Gamma) o phi^h + id (x) Theta_Gamma on M_n (x) M_m."""
    g = gamma_map(gamma, phi.d)
    m, d = g.shape
    n = phi.n
    F = weyl_coefficient(g)
    Ft = np.eye(m * (d + 1)) + np.kron(np.eye(m), ito_projection(d)) @ F
    big_ft = np.kron(np.eye(n), Ft)
    theta = flow_generator(g)
    # reorder C^n (x) k-hat (x) C^m into C^n (x) C^m (x) k-hat
    perm = np.kron(np.eye(n), _swap(d + 1, m))
    basis = [(u, a) for u in range(n) for a in range(m)]

    def lifted(t):
        out = np.zeros((n * m * (d + 1),) * 2, dtype=complex)
        for r, (u, a) in enumerate(basis):
            for c, (v, b) in enumerate(basis):
                coef = t[r, c]
                if coef == 0:
                    continue
                eab = matrix_unit(m, a, b)
                euv = matrix_unit(n, u, v)
                h = perm @ np.kron(phi.assemble(euv), eab) @ perm.T
                out += coef * (dagger(big_ft) @ h @ big_ft + np.kron(euv, theta.assemble(eab)))
        return out

    return StochGen.from_function(lifted, n * m, d)


def _swap(p: int, q: int) -> np.ndarray:
    """Unitary C^p (x) C^q -> C^q (x) C^p."""
    s = np.zeros((p * q, p * q))
    for i in range(p):
        for j in range(q):
            s[j * p + i, i * q + j] = 1.0
    return s


# --------------------------------------------------------------------------
# GKSL form and positivity classes


def psi_R(R: np.ndarray, n: int | None = None) -> StochGen:
    """psi_R(a) = R a E^0 + E_0 a R* - a (x) Delta."""
    R = as_matrix(R, "R")
    n = R.shape[1] if n is None else n
    if R.shape[1] != n or R.shape[0] % n:
        raise InputError(f"R must have shape (n(d+1), n), got {R.shape}")
    d = R.shape[0] // n - 1
    if d < 0:
        raise InputError("R has too few rows")
    e0, _ = noise_embeddings(n, d)
    delta = ito_projection(d)
    f = (
        SuperOperator.conjugation(R, e0.T)
        + SuperOperator.conjugation(e0, dagger(R))
        - tensor_right(delta, n)
    )
    return StochGen.from_superoperator(f, d)


def quasicontractivity_grade(phi: StochGen, tol: float = TOL_PSD) -> float:
    """Smallest beta with phi(1) <= beta Delta-perp (``inf`` if none exists).

    Writing phi(1) = [[X00, X01], [X10, X11]] in vacuum/noise blocks, the
    condition holds iff -X11 >= 0, X10 lies in the range of X11, and
    beta >= lambda_max(X00 + X01 (-X11)^+ X10).
    """
    n, d = phi.n, phi.d
    x = phi.assemble(np.eye(n))
    scale = max(1.0, op_norm(x))
    if np.max(np.abs(x - dagger(x))) > 1e-12 * scale:
        return np.inf
    x = (x + dagger(x)) / 2
    e0, ek = noise_embeddings(n, d)
    x00 = e0.T @ x @ e0
    if d == 0:
        beta = float(np.linalg.eigvalsh(x00)[-1])
        return 0.0 if abs(beta) <= tol * scale else beta
    x01 = e0.T @ x @ ek
    neg11 = -(ek.T @ x @ ek)
    w, v = np.linalg.eigh(neg11)
    if w[0] < -tol * scale:
        return np.inf
    keep = w > tol * scale
    null = v[:, ~keep]
    if null.size and op_norm(dagger(null) @ dagger(x01)) > np.sqrt(tol) * scale:
        return np.inf
    vk = v[:, keep]
    pinv = vk @ np.diag(1 / w[keep]) @ dagger(vk)
    s = x00 + x01 @ pinv @ dagger(x01)
    beta = float(np.linalg.eigvalsh((s + dagger(s)) / 2)[-1])
    return 0.0 if abs(beta) <= tol * scale else beta


@dataclass
class CocycleGeneratorReport:
    is_cp: bool
    choi_min_eig: float
    beta: float
    tol: float

    @property
    def contractive_class(self) -> bool:
        return self.is_cp and self.beta <= 0

    def to_dict(self) -> dict:
        return {
            "is_cp": self.is_cp,
            "choi_min_eig": self.choi_min_eig,
            "beta": self.beta,
            "contractive_class": self.contractive_class,
            "tol": self.tol,
        }


def is_cp_cocycle_generator(phi: StochGen, R: np.ndarray, tol: float = TOL_PSD) -> CocycleGeneratorReport:
    """Test whether phi - psi_R is completely positive; grade quasicontractivity."""
    chi_map = phi - psi_R(R, phi.n)
    if chi_map.d != phi.d:
        raise InputError("R does not match the noise dimension of phi")
    lam = choi_min_eig(chi_map.as_superoperator())
    return CocycleGeneratorReport(lam >= -tol, lam, quasicontractivity_grade(phi, tol), tol)


# --------------------------------------------------------------------------
# structure data


@dataclass(frozen=True, eq=False)
class StructureData:
    """pi: M_n -> M_n (x) M_d a *-homomorphism, l: (n d) x n, h hermitian n x n."""

    pi: SuperOperator
    l: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        n = self.pi.n_in
        if self.pi.n_out % n:
            raise InputError("pi must map M_n into M_n (x) M_d")
        d = self.pi.n_out // n
        l = as_matrix(self.l, "l")
        h = as_matrix(self.h, "h")
        if l.shape != (n * d, n):
            raise InputError(f"l must have shape ({n * d}, {n}), got {l.shape}")
        if h.shape != (n, n):
            raise InputError(f"h must have shape ({n}, {n})")
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return self.pi.n_in

    @property
    def d(self) -> int:
        return self.pi.n_out // self.pi.n_in

    def violations(self, tol: float = 1e-11) -> dict:
        """Defects of the *-homomorphism and hermiticity hypotheses."""
        n = self.n
        unit = self.pi(np.eye(n))
        out = {
            "multiplicative": homomorphism_defect(self.pi),
            "star": hermitian_map_defect(self.pi),
            "unit_projection": float(np.max(np.abs(unit @ unit - unit), initial=0.0)),
            "unit_hermitian": float(np.max(np.abs(unit - dagger(unit)), initial=0.0)),
            "h_hermitian": float(np.max(np.abs(self.h - dagger(self.h)))),
        }
        return out

    def validate(self, tol: float = 1e-11):
        bad = {k: v for k, v in self.violations(tol).items() if v > tol}
        if bad:
            raise InputError(f"invalid structure data: {bad}")

    def is_unital(self, tol: float = 1e-11) -> bool:
        unit = self.pi(np.eye(self.n))
        return float(np.max(np.abs(unit - np.eye(unit.shape[0])), initial=0.0)) <= tol


def _generator_units(n: int) -> list:
    """Index pairs (k, l) of the units E_{i,i+1}, E_{i+1,i}, preceded by None for the identity."""
    return [None] + [(k, k + 1) for k in range(n - 1)] + [(k + 1, k) for k in range(n - 1)]


def matrix_generators(n: int) -> list:
    """The units E_{i,i+1}, E_{i+1,i} and the identity; words in them span M_n."""
    return [np.eye(n, dtype=complex) if g is None else matrix_unit(n, *g) for g in _generator_units(n)]


def homomorphism_defect(pi: SuperOperator) -> float:
    """Largest entry of pi(E_i0) pi(E_0j) - pi(E_ij) and pi(E_0i) pi(E_j0) - delta_ij pi(E_00).

    Both vanish iff the images of the matrix units multiply like matrix units,
    which is the case iff pi is multiplicative on all of M_n.
    """
    P = pi.images_of_units()
    if P.size == 0:
        return 0.0
    first = np.einsum("ipq,jqr->ijpr", P[:, 0], P[0]) - P
    second = np.einsum("ipq,jqr->ijpr", P[0], P[:, 0])
    idx = np.arange(P.shape[0])
    second[idx, idx] -= P[0, 0]
    return float(max(np.max(np.abs(first)), np.max(np.abs(second))))


def amplification(n: int, d: int) -> SuperOperator:
    """The unital representation a -> a (x) I_d."""
    return tensor_right(np.eye(d), n)


def random_representation(n: int, d: int, k: int, rng) -> SuperOperator:
    """a -> V (a (x) I_k) V* for a random isometry V: C^n (x) C^k -> C^n (x) C^d.

    Unital exactly when ``k == d``; requires ``k <= d``.
    """
    if k > d or k < 0:
        raise InputError("need 0 <= k <= d")
    z = rng.normal(size=(n * d, n * k)) + 1j * rng.normal(size=(n * d, n * k))
    v, _ = np.linalg.qr(z)
    v = v[:, : n * k]
    return SuperOperator.conjugation(v) @ tensor_right(np.eye(k), n)


def structure_blocks(s: StructureData):
    """The maps (Lcal, delta) with Lcal(a) = l*pi(a)l - {l*l, a}/2 + i[h, a], delta(a) = la - pi(a)l."""
    l, h = s.l, s.h
    ls = dagger(l)

    def lcal(a):
        return ls @ s.pi(a) @ l - 0.5 * (ls @ l @ a + a @ ls @ l) + 1j * (h @ a - a @ h)

    def delta(a):
        return l @ a - s.pi(a) @ l

    return lcal, delta


def from_structure_data(s: StructureData, tol: float = 1e-11):
    """Build (phi, R, L) with phi = [[Lcal, delta^dagger], [delta, pi - iota]].

    R = [ih - l*l/2; l] and L = [l, -I]; the identity
    phi = L* pi(.) L + psi_R is checked before returning.
    """
    s.validate(tol)
    n, d = s.n, s.d
    e0, ek = noise_embeddings(n, d)
    lcal, delta = structure_blocks(s)

    def phi_fn(a):
        dl = delta(a)
        dstar = dagger(delta(dagger(a)))
        noise = s.pi(a) - np.kron(a, np.eye(d))
        return e0 @ lcal(a) @ e0.T + ek @ dl @ e0.T + e0 @ dstar @ ek.T + ek @ noise @ ek.T

    phi = StochGen.from_function(phi_fn, n, d)
    R = e0 @ (1j * s.h - 0.5 * dagger(s.l) @ s.l) + ek @ s.l
    L = s.l @ e0.T - ek.T
    Ls = dagger(L)
    rebuilt = SuperOperator.from_function(lambda a: Ls @ s.pi(a) @ L, n, n * (d + 1))
    defect = (rebuilt + psi_R(R, n).as_superoperator()).distance(phi.as_superoperator())
    scale = max(1.0, op_norm(s.l) ** 2, op_norm(s.h))
    if defect > tol * scale:
        raise InputError(f"GKSL identity fails by {defect:.3e}")
    return phi, R, L


# --------------------------------------------------------------------------
# structure maps


@dataclass
class StructureMapReport:
    hermitian_defect: float
    relation_defect: float
    unit_defect: float
    tol: float
    scale: float = 1.0

    @property
    def hermitian(self) -> bool:
        return self.hermitian_defect <= self.tol * self.scale

    @property
    def multiplicative(self) -> bool:
        return self.relation_defect <= self.tol * self.scale**2

    @property
    def vanishes_at_identity(self) -> bool:
        return self.unit_defect <= self.tol * self.scale

    @property
    def passed(self) -> bool:
        return self.hermitian and self.multiplicative and self.vanishes_at_identity

    def to_dict(self) -> dict:
        return {
            "hermitian": self.hermitian,
            "multiplicative_relation": self.multiplicative,
            "vanishes_at_identity": self.vanishes_at_identity,
            "passed": self.passed,
            "hermitian_defect": self.hermitian_defect,
            "relation_defect": self.relation_defect,
            "unit_defect": self.unit_defect,
            "scale": self.scale,
            "tol": self.tol,
        }


def structure_relation_defect(phi: StochGen) -> float:
    """Max entry of phi(ab) - phi(a)iota(b) - iota(a)phi(b) - phi(a)Delta phi(b).

    Here a runs over matrix units and b over the generators of :func:`matrix_generators`. Because
    iota(b) commutes with Delta, the defect at a product b c expands into defects
    at (a, b), (ab, c) and (b, c), so this vanishes iff the relation holds on M_n.
    """
    n, m = phi.n, phi.d + 1
    N = n * m
    P = phi.as_superoperator().images_of_units()  # (n, n, N, N)
    noise = np.array([u * m + k for u in range(n) for k in range(1, m)], dtype=int)
    p_noise_cols = P[:, :, :, noise]
    p_noise_cols = p_noise_cols.reshape(n * n * N, noise.size)
    blocks = P.reshape(n, n, N, n, m)
    worst = 0.0
    for g in _generator_units(n):
        if g is None:
            # phi(a 1) - phi(a) iota(1) cancels
            pg = phi(np.eye(n))
            d = np.zeros_like(P)
        else:
            k, l = g
            pg = P[k, l]
            d = np.zeros_like(P)
            d[:, k] += P[:, l]  # phi(E_ij E_kl) = delta_jk phi(E_il)
            # phi(E_ij) iota(E_kl): column block l receives column block k
            d.reshape(n, n, N, n, m)[:, :, :, l, :] -= blocks[:, :, :, k, :]
        # iota(E_ij) phi(g): row block i receives row block j of phi(g)
        rows = pg.reshape(n, m, N)
        d5 = d.reshape(n, n, n, m, N)
        for i in range(n):
            d5[i, :, i] -= rows
        d -= (p_noise_cols @ pg[noise, :]).reshape(n, n, N, N)
        worst = max(worst, float(np.max(np.abs(d))))
    return worst


def verify_structure_map(phi: StochGen, tol: float = 1e-10) -> StructureMapReport:
    """Check phi-dagger = phi, the structure relation on matrix-unit pairs, and phi(1) = 0.

    Defects are absolute; the relation defect is compared with
    ``tol * scale**2`` and the others with ``tol * scale``, where ``scale``
    is ``max(1, largest kernel entry)``.
    """
    so = phi.as_superoperator()
    scale = max(1.0, float(np.max(np.abs(so.kernel))))
    herm = hermitian_map_defect(so)
    unit = float(np.max(np.abs(phi.assemble(np.eye(phi.n)))))
    rel = structure_relation_defect(phi)
    return StructureMapReport(herm, rel, unit, tol, scale)


@dataclass
class InnerFlowReport:
    min_eig: float
    hermitian_defect: float
    unit_defect: float
    n_functionals: int
    tol: float

    @property
    def positivity_ok(self) -> bool:
        return self.min_eig >= -self.tol

    @property
    def passed(self) -> bool:
        return self.positivity_ok and self.hermitian_defect <= self.tol and self.unit_defect <= self.tol

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "positivity_ok": self.positivity_ok,
            "min_eig": self.min_eig,
            "hermitian_defect": self.hermitian_defect,
            "unit_defect": self.unit_defect,
            "n_functionals": self.n_functionals,
            "tol": self.tol,
        }


def random_density(k: int, rng) -> np.ndarray:
    z = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    rho = z @ dagger(z)
    return rho / np.trace(rho).real


def inner_flow_generator_check(
    phi: StochGen,
    tol: float = 1e-10,
    n_functionals: int = 20,
    n_random: int = 10,
    rng=None,
) -> InnerFlowReport:
    """Check mu(a*a) - mu(a)*a - a*mu(a) >= 0 for mu = (id (x) omega) o phi.

    omega runs over the vacuum state and ``n_functionals`` random states of
    M_{d+1}; a runs over matrix units and ``n_random`` random matrices.
    Eigenvalues are scaled by ``max(1, ||M||)``.
    """
    rng = np.random.default_rng(rng)
    n, m = phi.n, phi.d + 1
    states = [np.diag(np.eye(m)[0]).astype(complex)]
    states += [random_density(m, rng) for _ in range(n_functionals)]
    tests = [matrix_unit(n, i, j) for i in range(n) for j in range(n)]
    for _ in range(n_random):
        z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        tests.append(z / op_norm(z))
    worst, herm, unit = np.inf, 0.0, 0.0
    for rho in states:
        mu = SuperOperator(n, n, np.einsum("ba,abpq->pq", rho, phi.kernels))
        herm = max(herm, hermitian_map_defect(mu))
        unit = max(unit, float(np.max(np.abs(mu(np.eye(n))))))
        for a in tests:
            ad = dagger(a)
            ma = mu(a)
            M = mu(ad @ a) - dagger(ma) @ a - ad @ ma
            M = (M + dagger(M)) / 2
            lam = float(np.linalg.eigvalsh(M)[0]) / max(1.0, op_norm(M))
            worst = min(worst, lam)
    return InnerFlowReport(worst, herm, unit, len(states), tol)


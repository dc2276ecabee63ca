"""Quantum exclusion process on finite ordered site sets.

Sites are points of Z^d ordered lexicographically.  The Fock basis vector
e_sigma for a subset sigma of the sites has index ``sum(1 << i for i in sigma)``
where ``i`` is the position of a site in the ordered list.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .errors import InputError, ResourceError
from .generators import StochGen, StructureData, amplification
from .matrix_space import SuperOperator, dagger, op_norm, vec

MAX_CAR_SITES = 12
MAX_SUPEROP_SITES = 5
MAX_SAMPLE_SITES = 8  # sampled bound check works with dense 2^p x 2^p matrices

Site = tuple


def _site(r) -> Site:
    try:
        return tuple(int(c) for c in np.atleast_1d(r))
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad site {r!r}") from exc


def sup_norm(r: Site) -> int:
    return max((abs(c) for c in r), default=0)


# --------------------------------------------------------------------------
# lattice configuration


@dataclass(frozen=True, eq=False)
class LatticeConfig:
    """Sites, hopping amplitudes alpha_{r,s} (from r to s) and site energies h_r."""

    dim: int
    sites: tuple
    amplitudes: dict = field(default_factory=dict)
    energies: dict = field(default_factory=dict)
    range_D: int | None = None
    bound_K: float | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise InputError("lattice dimension must be positive")
        sites = sorted({_site(r) for r in self.sites})
        if not sites:
            raise InputError("at least one site is required")
        if len(sites) != len(self.sites):
            raise InputError("sites must be distinct")
        if any(len(r) != self.dim for r in sites):
            raise InputError(f"every site must have {self.dim} coordinates")
        known = set(sites)
        amps = {}
        for (r, s), a in self.amplitudes.items():
            r, s = _site(r), _site(s)
            if r not in known or s not in known:
                raise InputError(f"amplitude on unknown pair {r} -> {s}")
            a = complex(a)
            if not np.isfinite(a):
                raise InputError("amplitudes must be finite")
            if a != 0:
                amps[(r, s)] = a
        ens = {}
        for r, h in self.energies.items():
            r = _site(r)
            if r not in known:
                raise InputError(f"energy on unknown site {r}")
            h = float(h)
            if not np.isfinite(h):
                raise InputError("energies must be finite")
            ens[r] = h
        object.__setattr__(self, "sites", tuple(sites))
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "energies", ens)
        bad = self.assumption_violations()
        if bad["range"]:
            raise InputError(f"amplitudes exceed the interaction range: {bad['range'][:3]}")

    @property
    def p(self) -> int:
        return len(self.sites)

    def index(self, r) -> int:
        try:
            return self.sites.index(_site(r))
        except ValueError:
            raise InputError(f"unknown site {r}") from None

    def alpha(self, r, s) -> complex:
        return self.amplitudes.get((_site(r), _site(s)), 0j)

    def active_pairs(self, full_pairs: bool = False) -> list:
        """Lexicographically ordered noise index set."""
        if full_pairs:
            return [(r, s) for r in self.sites for s in self.sites]
        return sorted(self.amplitudes)

    def neighbourhood(self, S: Iterable) -> set:
        """S+ = S together with every site linked to S by a nonzero amplitude."""
        S = {_site(r) for r in S}
        out = set(S)
        for r, s in self.amplitudes:
            if r in S:
                out.add(s)
            if s in S:
                out.add(r)
        return out

    def assumption_violations(self) -> dict:
        rng, amp = [], []
        for (r, s), a in self.amplitudes.items():
            dist = sup_norm(tuple(x - y for x, y in zip(r, s)))
            if self.range_D is not None and dist > self.range_D:
                rng.append((r, s))
            if self.bound_K is not None and (any(r) or any(s)):
                limit = self.bound_K * max(sup_norm(r), sup_norm(s)) ** (2 - self.dim)
                if abs(a) ** 2 > limit * (1 + 1e-12):
                    amp.append((r, s))
        return {"range": rng, "amplitude": amp}

    def restrict(self, sites: Iterable) -> "LatticeConfig":
        keep = {_site(r) for r in sites}
        return LatticeConfig(
            self.dim,
            tuple(sorted(keep)),
            {q: a for q, a in self.amplitudes.items() if q[0] in keep and q[1] in keep},
            {r: h for r, h in self.energies.items() if r in keep},
            self.range_D,
            self.bound_K,
        )

    # json ---------------------------------------------------------------
    def to_json(self) -> dict:
        out = {
            "dim": self.dim,
            "sites": [list(r) for r in self.sites],
            "amplitudes": [
                {"from": list(r), "to": list(s), "re": a.real, "im": a.imag}
                for (r, s), a in sorted(self.amplitudes.items())
            ],
            "energies": [{"site": list(r), "h": h} for r, h in sorted(self.energies.items())],
        }
        if self.range_D is not None:
            out["D"] = self.range_D
        if self.bound_K is not None:
            out["K"] = self.bound_K
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "LatticeConfig":
        try:
            amps = {}
            for a in obj.get("amplitudes", []):
                key = (_site(a["from"]), _site(a["to"]))
                amps[key] = amps.get(key, 0j) + complex(float(a.get("re", 0.0)), float(a.get("im", 0.0)))
            ens = {_site(e["site"]): float(e["h"]) for e in obj.get("energies", [])}
            D = obj.get("D")
            K = obj.get("K")
            return cls(
                int(obj["dim"]),
                tuple(_site(r) for r in obj["sites"]),
                amps,
                ens,
                None if D is None else int(D),
                None if K is None else float(K),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"malformed lattice config: {exc}") from exc


def box_sites(dim: int, radius: int) -> list:
    """All points of Z^dim with sup-norm at most ``radius``."""
    return [tuple(p) for p in itertools.product(range(-radius, radius + 1), repeat=dim)]


def lattice_patch(dim: int, radius: int, D: int = 1, amplitude: complex = 1.0, K: float | None = None,
                  energies: dict | None = None, directed: bool = False) -> LatticeConfig:
    """Box patch centred at the origin with a uniform amplitude on every pair within range D.

    With ``directed`` only pairs r < s (lexicographically) carry an amplitude.
    """
    sites = box_sites(dim, radius)
    amps = {}
    for r in sites:
        for s in sites:
            if r != s and sup_norm(tuple(x - y for x, y in zip(r, s))) <= D and (not directed or r < s):
                amps[(r, s)] = amplitude
    K = abs(amplitude) ** 2 if K is None else K
    return LatticeConfig(dim, tuple(sites), amps, energies or {}, D, K)


def chain(length: int, amplitudes: dict | None = None, energies: dict | None = None) -> LatticeConfig:
    """1-D chain on sites 1..length; amplitude keys are integer pairs."""
    amps = {((r,), (s,)): a for (r, s), a in (amplitudes or {}).items()}
    ens = {(r,): h for r, h in (energies or {}).items()}
    return LatticeConfig(1, tuple((i,) for i in range(1, length + 1)), amps, ens)


# --------------------------------------------------------------------------
# CAR algebra


def epsilon(sigma: Iterable, r) -> int:
    """(-1)^{#{s in sigma: s > r}}."""
    return -1 if sum(1 for s in sigma if s > r) % 2 else 1


@dataclass(frozen=True, eq=False)
class CARAlgebra:
    sites: tuple
    b: np.ndarray  # (p, 2^p, 2^p) annihilators

    @property
    def p(self) -> int:
        return len(self.sites)

    @property
    def dim(self) -> int:
        return 2**self.p

    def index(self, r) -> int:
        try:
            return self.sites.index(_site(r))
        except ValueError:
            raise InputError(f"unknown site {r}") from None

    def annihilator(self, r) -> np.ndarray:
        return self.b[self.index(r)]

    def number(self, r) -> np.ndarray:
        br = self.annihilator(r)
        return br.T @ br

    def vacuum(self) -> np.ndarray:
        e = np.zeros(self.dim)
        e[0] = 1.0
        return e

    def product(self, idx: Iterable[int]) -> np.ndarray:
        """b_sigma = b_{s_1} b_{s_2} ... over increasing site positions."""
        out = np.eye(self.dim)
        for i in sorted(idx):
            out = out @ self.b[i]
        return out

    def monomial(self, sigma: Iterable[int], tau: Iterable[int]) -> np.ndarray:
        """b_sigma* b_tau for subsets given by site positions."""
        return self.product(sigma).T @ self.product(tau)


def build_car(sites: Iterable) -> CARAlgebra:
    sites = tuple(_site(r) for r in sites)
    if not sites:
        raise InputError("at least one site is required")
    if len(set(sites)) != len(sites):
        raise InputError("sites must be distinct")
    p = len(sites)
    if p > MAX_CAR_SITES:
        raise ResourceError(f"{p} sites exceeds the CAR dimension guard of {MAX_CAR_SITES}")
    dim = 2**p
    b = np.zeros((p, dim, dim))
    for mask in range(dim):
        members = [i for i in range(p) if mask >> i & 1]
        for i in members:
            b[i, mask & ~(1 << i), mask] = epsilon(members, i)
    return CARAlgebra(sites, b)


def car_relation_defects(car: CARAlgebra) -> dict:
    """Exact integer defects of the anticommutation relations."""
    p, ident = car.p, np.eye(car.dim)
    anti, mixed, partial = 0.0, 0.0, 0.0
    for i in range(p):
        bi = car.b[i]
        partial = max(partial, float(np.max(np.abs(bi @ bi.T @ bi - bi))))
        for j in range(p):
            bj = car.b[j]
            anti = max(anti, float(np.max(np.abs(bi @ bj + bj @ bi))))
            mixed = max(mixed, float(np.max(np.abs(bi @ bj.T + bj.T @ bi - (i == j) * ident))))
    return {"bb": anti, "bb_star": mixed, "partial_isometry": partial}


# --------------------------------------------------------------------------
# transport maps


def transport_operator(car: CARAlgebra, config: LatticeConfig, r, s) -> np.ndarray:
    """t_{r,s} = alpha_{r,s} b_s* b_r."""
    a = config.alpha(r, s)
    return a * (car.annihilator(s).T @ car.annihilator(r))


def hamiltonian(car: CARAlgebra, config: LatticeConfig) -> np.ndarray:
    """h = sum_r h_r b_r* b_r."""
    out = np.zeros((car.dim, car.dim))
    for r, h in config.energies.items():
        if r in car.sites:
            out = out + h * car.number(r)
    return out


def rho_apply(t: np.ndarray, a: np.ndarray) -> np.ndarray:
    return t @ a - a @ t


def tau_apply(t: np.ndarray, a: np.ndarray) -> np.ndarray:
    ts = dagger(t)
    tt = ts @ t
    return ts @ a @ t - 0.5 * (tt @ a + a @ tt)


def _guard_superop(car: CARAlgebra):
    if car.p > MAX_SUPEROP_SITES:
        raise ResourceError(
            f"superoperators on {car.p} sites exceed the guard of {MAX_SUPEROP_SITES} sites"
        )


def _rho_kernel(t: np.ndarray) -> np.ndarray:
    n = t.shape[0]
    return np.kron(np.eye(n), t) - np.kron(t.T, np.eye(n))


def _tau_kernel(t: np.ndarray) -> np.ndarray:
    n = t.shape[0]
    tt = dagger(t) @ t
    return np.kron(t.T, dagger(t)) - 0.5 * (np.kron(np.eye(n), tt) + np.kron(tt.T, np.eye(n)))


@dataclass(frozen=True)
class TransportMaps:
    rho: SuperOperator
    tau: SuperOperator
    delta: SuperOperator


def transport_superops(car: CARAlgebra, config: LatticeConfig, r, s) -> TransportMaps:
    """rho_{r,s} = [t, .], tau_{r,s}(a) = t*at - (t*t a + a t*t)/2, delta_r = i h_r [b_r* b_r, .]."""
    _guard_superop(car)
    t = transport_operator(car, config, r, s)
    n = car.dim
    h = config.energies.get(_site(r), 0.0)
    delta = SuperOperator(n, n, 1j * h * _rho_kernel(car.number(r)))
    return TransportMaps(SuperOperator(n, n, _rho_kernel(t)), SuperOperator(n, n, _tau_kernel(t)), delta)


def derivation_part(car: CARAlgebra, config: LatticeConfig) -> SuperOperator:
    """delta = sum_r delta_r = i[h, .]."""
    _guard_superop(car)
    return SuperOperator(car.dim, car.dim, 1j * _rho_kernel(hamiltonian(car, config)))


def dissipative_part(car: CARAlgebra, config: LatticeConfig) -> SuperOperator:
    """tau = sum over pairs of tau_{r,s}."""
    _guard_superop(car)
    n = car.dim
    k = np.zeros((n * n, n * n), dtype=complex)
    for r, s in config.active_pairs():
        if r in car.sites and s in car.sites:
            k += _tau_kernel(transport_operator(car, config, r, s))
    return SuperOperator(n, n, k)


def lindbladian(car: CARAlgebra, config: LatticeConfig) -> SuperOperator:
    """Lcal = delta + tau."""
    return derivation_part(car, config) + dissipative_part(car, config)


def lindbladian_apply(car: CARAlgebra, config: LatticeConfig, a: np.ndarray, pairs=None) -> np.ndarray:
    """Lcal(a) evaluated directly on matrices (no superoperator kernel).

    ``pairs`` restricts the tau sum; by default every active pair inside the algebra.
    """
    h = hamiltonian(car, config)
    out = 1j * (h @ a - a @ h)
    if pairs is None:
        pairs = [q for q in config.active_pairs() if q[0] in car.sites and q[1] in car.sites]
    for r, s in pairs:
        out = out + tau_apply(transport_operator(car, config, r, s), a)
    return out


def structure_map(car: CARAlgebra, config: LatticeConfig, full_pairs: bool = False) -> StochGen:
    """phi = [[Lcal, rho*], [rho, 0]] with one noise direction per pair."""
    _guard_superop(car)
    pairs = _pairs_in(car, config, full_pairs)
    n, d = car.dim, len(pairs)
    kernels = np.zeros((d + 1, d + 1, n * n, n * n), dtype=complex)
    kernels[0, 0] = lindbladian(car, config).kernel
    for q, (r, s) in enumerate(pairs, start=1):
        rho = SuperOperator(n, n, _rho_kernel(transport_operator(car, config, r, s)))
        kernels[q, 0] = rho.kernel
        kernels[0, q] = rho.dagger().kernel
    return StochGen(n, d, kernels)


def _pairs_in(car: CARAlgebra, config: LatticeConfig, full_pairs: bool) -> list:
    return [q for q in config.active_pairs(full_pairs) if q[0] in car.sites and q[1] in car.sites]


def gksl_data(car: CARAlgebra, config: LatticeConfig, full_pairs: bool = False) -> StructureData:
    """l stacks the transport operators, h = sum h_r b_r* b_r, pi(a) = a (x) I."""
    pairs = _pairs_in(car, config, full_pairs)
    n, d = car.dim, len(pairs)
    l = np.zeros((n * d, n), dtype=complex)
    for q, (r, s) in enumerate(pairs):
        l[q::d, :] = transport_operator(car, config, r, s)
    return StructureData(amplification(n, d), l, hamiltonian(car, config).astype(complex))


# --------------------------------------------------------------------------
# locality


def monomial_basis(car: CARAlgebra):
    """Matrix whose columns are vec(b_sigma* b_tau), and the (sigma, tau) labels."""
    p = car.p
    subsets = [tuple(i for i in range(p) if m >> i & 1) for m in range(2**p)]
    prods = {s: car.product(s) for s in subsets}
    labels, cols = [], []
    for s in subsets:
        for t in subsets:
            labels.append((s, t))
            cols.append(vec(prods[s].T @ prods[t]))
    return np.array(cols).T, labels


@dataclass
class LocalityReport:
    subset: list
    neighbourhood: list
    delta_outside: int = 0
    rho_outside: int = 0
    delta_support: int = 0
    tau_support: int = 0
    rho_support: int = 0
    noise_support: int = 0
    monomials: int = 0

    @property
    def passed(self) -> bool:
        return not (self.delta_outside or self.rho_outside or self.delta_support
                    or self.tau_support or self.rho_support or self.noise_support)

    def to_dict(self) -> dict:
        return {
            "subset": [list(r) for r in self.subset],
            "neighbourhood": [list(r) for r in self.neighbourhood],
            "monomials_checked": self.monomials,
            "violations": {
                "delta_r_nonzero_outside": self.delta_outside,
                "rho_nonzero_for_pair_outside": self.rho_outside,
                "delta_support": self.delta_support,
                "tau_support": self.tau_support,
                "rho_support": self.rho_support,
                "noise_support": self.noise_support,
            },
            "passed": self.passed,
        }


def locality_check(car: CARAlgebra, config: LatticeConfig, S: Iterable, zero_tol: float = 1e-12) -> LocalityReport:
    """Check locality of delta, tau and rho on monomials b_sigma* b_tau over S.

    Supports are read off from the expansion in the monomial basis; a
    coefficient counts as nonzero above ``zero_tol`` times the largest one.
    """
    _guard_superop(car)
    S = sorted({_site(r) for r in S})
    for r in S:
        car.index(r)
    Splus = sorted(config.neighbourhood(S) & set(car.sites))
    basis, labels = monomial_basis(car)
    solve = np.linalg.inv(basis)
    site_of = car.sites

    def support(x):
        c = solve @ vec(x)
        big = np.abs(c)
        if big.size == 0 or big.max() == 0:
            return set()
        out = set()
        for k in np.nonzero(big > zero_tol * max(1.0, big.max()))[0]:
            s, t = labels[k]
            out.update(site_of[i] for i in s + t)
        return out

    def nonzero(x):
        return float(np.max(np.abs(x))) > zero_tol

    pos = [car.index(r) for r in S]
    subsets = [tuple(i for i in pos if m >> pos.index(i) & 1) for m in range(2 ** len(pos))]
    pairs = _pairs_in(car, config, False)
    h = hamiltonian(car, config)
    rep = LocalityReport(S, Splus)
    Sset, Splus_set = set(S), set(Splus)
    for s_idx in subsets:
        for t_idx in subsets:
            a = car.monomial(s_idx, t_idx)
            rep.monomials += 1
            for r in car.sites:
                if r not in Sset:
                    hr = config.energies.get(r, 0.0)
                    nr = car.number(r)
                    if nonzero(1j * hr * (nr @ a - a @ nr)):
                        rep.delta_outside += 1
            delta_a = 1j * (h @ a - a @ h)
            if not support(delta_a) <= Sset:
                rep.delta_support += 1
            tau_a = np.zeros_like(a, dtype=complex)
            for r, s in pairs:
                t = transport_operator(car, config, r, s)
                rho_a = rho_apply(t, a)
                tau_a = tau_a + tau_apply(t, a)
                if r not in Sset and s not in Sset and nonzero(rho_a):
                    rep.rho_outside += 1
                if nonzero(rho_a):
                    if not support(rho_a) <= Splus_set:
                        rep.rho_support += 1
                    if r not in Splus_set or s not in Splus_set:
                        rep.noise_support += 1
            if not support(tau_a) <= Splus_set:
                rep.tau_support += 1
    return rep


# --------------------------------------------------------------------------
# Bratteli-Kishimoto bound


def shell(dim: int, n: int, D: int) -> set:
    """R_n = {r : ||r||_inf <= n D}."""
    return set(box_sites(dim, n * D))


def perturbation_pairs(dim: int, n: int, D: int) -> list:
    """S_n: pairs crossing from R_n to R_{n+1} minus R_n (either direction) within range D."""
    inner = shell(dim, n, D)
    outer = shell(dim, n + 1, D) - inner
    out = []
    for r in sorted(inner):
        for s in sorted(outer):
            if sup_norm(tuple(x - y for x, y in zip(r, s))) <= D:
                out.append((r, s))
                out.append((s, r))
    return sorted(out)


def brk_constant(dim: int, D: int, K) -> Fraction:
    """M = 8 K d (1 + delta_{1,d}) D^{3-d} (1 + 2D)^{2d-1}."""
    K = Fraction(K)
    return 8 * K * dim * (2 if dim == 1 else 1) * Fraction(D) ** (3 - dim) * (1 + 2 * D) ** (2 * dim - 1)


def _abs2(a: complex) -> Fraction:
    return Fraction(a.real) ** 2 + Fraction(a.imag) ** 2


@dataclass
class BRKReport:
    dim: int
    shell_n: int
    D: int
    K: float
    pair_count: int
    pair_bound: int
    certified: Fraction
    M: Fraction
    sampled_max: float | None
    samples: int
    skipped_reason: str | None
    assumption_violations: dict

    @property
    def cardinality_ok(self) -> bool:
        return self.pair_count <= self.pair_bound

    @property
    def norm_ok(self) -> bool:
        return self.certified <= self.M * self.shell_n

    @property
    def sampled_ok(self) -> bool:
        return self.sampled_max is None or self.sampled_max <= float(self.certified) * (1 + 1e-12) + 1e-12

    @property
    def passed(self) -> bool:
        return (self.cardinality_ok and self.norm_ok and self.sampled_ok
                and not any(self.assumption_violations.values()))

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "n": self.shell_n,
            "D": self.D,
            "K": self.K,
            "patch_centre": [0] * self.dim,
            "pair_count": self.pair_count,
            "pair_bound": self.pair_bound,
            "cardinality_ok": self.cardinality_ok,
            "certified_bound": str(self.certified),
            "certified_bound_float": float(self.certified),
            "M": str(self.M),
            "M_times_n": str(self.M * self.shell_n),
            "norm_ok": self.norm_ok,
            "sampled_max": self.sampled_max,
            "samples": self.samples,
            "sampled_ok": self.sampled_ok,
            "sampled_skipped": self.skipped_reason,
            "assumption_violations": {k: [[list(r), list(s)] for r, s in v]
                                      for k, v in self.assumption_violations.items()},
            "passed": self.passed,
        }


def random_local_element(car: CARAlgebra, positions: list, rng) -> np.ndarray:
    """Random element of the subalgebra generated by the given sites, unit operator norm."""
    subsets = [tuple(i for k, i in enumerate(positions) if m >> k & 1) for m in range(2 ** len(positions))]
    prods = [car.product(s) for s in subsets]
    a = np.zeros((car.dim, car.dim), dtype=complex)
    for ps in prods:
        coeff = rng.normal(size=len(prods)) + 1j * rng.normal(size=len(prods))
        right = sum(c * pt for c, pt in zip(coeff, prods))
        a += ps.T @ right
    return a / op_norm(a)


def brk_bound_check(config: LatticeConfig, n: int, samples: int = 20, rng=None) -> BRKReport:
    """Check the cardinality of S_n, the certified bound sum 2|alpha|^2 <= M n,
    and a sampled lower estimate of ||Lcal(a) - Lcal^{n,0}(a)|| on A(n).

    The patch must be centred at the origin and contain R_{n+1}.  The sampled
    check runs on CAR(R_{n+1}) and is skipped above ``MAX_SAMPLE_SITES`` sites.
    """
    d = config.dim
    if d not in (1, 2):
        raise InputError("the bound check supports lattice dimensions 1 and 2")
    if config.range_D is None or config.bound_K is None:
        raise InputError("the config must declare D and K")
    if int(n) != n or n < 1:
        raise InputError("shell index must be a positive integer")
    D, K = config.range_D, config.bound_K
    r_next = shell(d, n + 1, D)
    if not r_next <= set(config.sites):
        raise InputError(f"patch does not contain R_{n + 1} (radius {(n + 1) * D})")
    pairs = perturbation_pairs(d, n, D)
    pair_bound = 4 * D * d * (1 + 2 * D) ** (2 * d - 1) * n ** (d - 1)
    certified = sum((2 * _abs2(config.alpha(r, s)) for r, s in pairs), Fraction(0))
    M = brk_constant(d, D, K)
    sampled, reason = None, None
    if len(r_next) > MAX_SAMPLE_SITES:
        reason = f"#R_{n + 1} = {len(r_next)} sites exceeds the sampling guard of {MAX_SAMPLE_SITES}"
    elif samples > 0:
        rng = np.random.default_rng(rng)
        sub = config.restrict(r_next)
        car = build_car(sub.sites)
        inner = shell(d, n, D)
        diff_pairs = [q for q in sub.active_pairs() if not (q[0] in inner and q[1] in inner)]
        positions = [car.index(r) for r in sorted(inner)]
        no_energy = LatticeConfig(sub.dim, sub.sites, sub.amplitudes, {}, sub.range_D, sub.bound_K)
        sampled = 0.0
        for _ in range(samples):
            a = random_local_element(car, positions, rng)
            diff = lindbladian_apply(car, no_energy, a, pairs=diff_pairs)
            sampled = max(sampled, op_norm(diff))
    return BRKReport(d, n, D, K, len(pairs), pair_bound, certified, M, sampled,
                     samples if sampled is not None else 0, reason, config.assumption_violations())

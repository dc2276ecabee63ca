"""Semigroups, global Schur-action semigroups and piecewise cocycle evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .generators import (
    StochGen,
    delta_perp,
    forward_transform,
    gamma_map,
    noise_vector,
    phi_xy,
    schur_generator,
)
from .matrix_space import (
    SchurActionMap,
    SuperOperator,
    TruncationSet,
    box_Jt,
    op_norm,
    psd_gap,
    truncation_operators,
)

DEFAULT_T_GRID = (0.0, 0.1, 0.25, 0.5, 1.0, 2.0)


def _check_time(t: float) -> float:
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise InputError(f"time must be finite and non-negative, got {t}")
    return t


def evolve(psi: SuperOperator, t: float) -> SuperOperator:
    """e^{t psi}."""
    t = _check_time(t)
    if t == 0:
        return SuperOperator.identity(psi.n_in)
    return psi.exp(t)


@dataclass
class SemigroupTrajectory:
    t_grid: tuple
    maps: list = field(default_factory=list)

    def semigroup_law_defect(self) -> float:
        """Max distance between e^{(s+t)psi} and e^{s psi} e^{t psi} over grid sums on the grid."""
        index = {t: k for k, t in enumerate(self.t_grid)}
        worst = 0.0
        for s in self.t_grid:
            for t in self.t_grid:
                k = index.get(s + t)
                if k is not None:
                    worst = max(worst, self.maps[k].distance(self.maps[index[s]] @ self.maps[index[t]]))
        return worst


def trajectory(psi: SuperOperator, t_grid=DEFAULT_T_GRID) -> SemigroupTrajectory:
    ts = tuple(_check_time(t) for t in t_grid)
    if not ts:
        raise InputError("t_grid must be nonempty")
    return SemigroupTrajectory(ts, [evolve(psi, t) for t in ts])


def global_semigroup(phi: StochGen, gamma, t: float) -> SchurActionMap:
    """P^Gamma_t acting blockwise by e^{t phi_{Gamma(alpha), Gamma(beta)}}."""
    t = _check_time(t)
    gen = schur_generator(phi, gamma_map(gamma, phi.d))
    if t == 0:
        return SchurActionMap.identity(gen.n, gen.m)
    return gen.exp(t)


# --------------------------------------------------------------------------
# step functions


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous step function with value ``values[i]`` on [t_i, t_{i+1}).

    The last value holds on [t_k, infinity).
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if b.ndim != 1 or b.size == 0 or b[0] != 0:
            raise InputError("breakpoints must be a nonempty list starting at 0")
        if np.any(np.diff(b) <= 0) or not np.all(np.isfinite(b)):
            raise InputError("breakpoints must be finite and strictly increasing")
        if v.ndim == 1:
            v = v.reshape(b.size, -1)
        if v.ndim != 2 or v.shape[0] != b.size:
            raise InputError("need one noise vector per interval")
        if not np.all(np.isfinite(v)):
            raise InputError("step function values must be finite")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @classmethod
    def constant(cls, x, d: int | None = None):
        x = noise_vector(x, d)
        return cls(np.array([0.0]), x.reshape(1, -1))

    def __call__(self, t: float) -> np.ndarray:
        k = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.values[max(k, 0)]

    def shift(self, r: float) -> "StepFunction":
        """The left shift t -> f(t + r)."""
        r = _check_time(r)
        keep = self.breakpoints > r
        b = np.concatenate(([0.0], self.breakpoints[keep] - r))
        v = np.vstack([self(r)[None, :], self.values[keep]])
        return StepFunction(b, v)

    def to_json(self) -> dict:
        from .serialize import vector_to_json

        return {"breakpoints": self.breakpoints.tolist(), "values": [vector_to_json(x) for x in self.values]}

    @classmethod
    def from_json(cls, obj: dict, d: int | None = None):
        from .serialize import vector_from_json

        try:
            b = obj["breakpoints"]
            vals = [vector_from_json(x) for x in obj["values"]]
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed step function: {exc}") from exc
        if not vals:
            raise InputError("step function has no values")
        f = cls(np.asarray(b, dtype=float), np.vstack(vals))
        if d is not None and f.d != d:
            raise InputError(f"step function has dimension {f.d}, expected {d}")
        return f


def common_breakpoints(f: StepFunction, g: StepFunction, t: float) -> np.ndarray:
    """Sorted union of breakpoints in [0, t) together with t."""
    pts = np.union1d(f.breakpoints, g.breakpoints)
    pts = pts[pts < t]
    return np.append(pts, t)


def piecewise_evolution(phi: StochGen, f: StepFunction, g: StepFunction, t: float) -> SuperOperator:
    """Q_t = P^{f(t_0), g(t_0)}_{t_1 - t_0} o ... o P^{f(t_i), g(t_i)}_{t - t_i}.

    The leftmost factor belongs to the earliest interval.
    """
    t = _check_time(t)
    if f.d != phi.d or g.d != phi.d:
        raise InputError("step functions do not match the noise dimension")
    q = SuperOperator.identity(phi.n)
    pts = common_breakpoints(f, g, t)
    for a, b in zip(pts[:-1], pts[1:]):
        q = q @ evolve(phi_xy(phi, f(a), g(a)), b - a)
    return q


def cocycle_identity_check(phi: StochGen, f: StepFunction, g: StepFunction, r: float, t: float) -> float:
    """Operator-norm residual of Q^{f,g}_{r+t} = Q^{f,g}_r o Q^{s_r f, s_r g}_t (kernel norm)."""
    r = _check_time(r)
    t = _check_time(t)
    lhs = piecewise_evolution(phi, f, g, r + t)
    rhs = piecewise_evolution(phi, f, g, r) @ piecewise_evolution(phi, f.shift(r), g.shift(r), t)
    return op_norm(lhs.kernel - rhs.kernel)


# --------------------------------------------------------------------------
# contractivity


@dataclass
class ContractivityReport:
    generator_gap: float
    semigroup_gaps: dict
    generator_equality_defect: float
    semigroup_equality_defect: float
    tol: float

    @property
    def generator_ok(self) -> bool:
        return self.generator_gap >= -self.tol

    @property
    def semigroup_ok(self) -> bool:
        return all(g >= -self.tol for g in self.semigroup_gaps.values())

    @property
    def agree(self) -> bool:
        return self.generator_ok == self.semigroup_ok

    @property
    def unital(self) -> bool:
        return (
            self.generator_ok
            and self.semigroup_ok
            and self.generator_equality_defect <= self.tol
            and self.semigroup_equality_defect <= self.tol
        )

    def to_dict(self) -> dict:
        return {
            "generator_inequality": self.generator_ok,
            "semigroup_inequality": self.semigroup_ok,
            "agree": self.agree,
            "unital": self.unital,
            "generator_gap": self.generator_gap,
            "semigroup_gaps": [{"t": t, "gap": g} for t, g in self.semigroup_gaps.items()],
            "generator_equality_defect": self.generator_equality_defect,
            "semigroup_equality_defect": self.semigroup_equality_defect,
            "tol": self.tol,
        }


def contractivity_criterion(
    phi: StochGen,
    J: TruncationSet | None = None,
    t_grid=DEFAULT_T_GRID,
    tol: float = 1e-9,
) -> ContractivityReport:
    """Generator inequality varphi(1 (x) box_J) <= 1 (x) A_J and the
    semigroup inequality P_t(1 (x) box_J) <= 1 (x) box_{J,t} on ``t_grid``.

    ``varphi`` is the global eta-generator of ``phi`` and ``P_t`` its semigroup.
    Gaps are scaled smallest eigenvalues of (right side - left side).
    """
    J = TruncationSet.full(phi.d) if J is None else J
    if J.d != phi.d:
        raise InputError("truncation set does not match the noise dimension")
    ts = tuple(_check_time(t) for t in t_grid)
    if not ts:
        raise InputError("t_grid must be nonempty")
    n = phi.n
    ident = np.eye(n)
    ops = truncation_operators(J)
    gen = forward_transform(phi)
    lhs = gen(np.kron(ident, ops.box))
    rhs = np.kron(ident, ops.A)
    g_gap = psd_gap(lhs, rhs)
    g_eq = float(np.max(np.abs(lhs - rhs)))
    s_gaps, s_eq = {}, 0.0
    for t in ts:
        p = gen.exp(t) if t > 0 else SchurActionMap.identity(n, phi.d + 1)
        lhs_t = p(np.kron(ident, ops.box))
        rhs_t = np.kron(ident, box_Jt(J, t))
        s_gaps[t] = psd_gap(lhs_t, rhs_t)
        s_eq = max(s_eq, float(np.max(np.abs(lhs_t - rhs_t))))
    return ContractivityReport(g_gap, s_gaps, g_eq, s_eq, tol)


def perturb_vacuum(phi: StochGen, eps: float) -> StochGen:
    """phi + eps * (a -> a (x) |e_0><e_0|)."""
    return phi + eps * delta_perp(phi.n, phi.d)


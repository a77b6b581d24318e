"""Shared optimization subroutines: a dense simplex LP solver and seeded
multistart derivative-free searches over observation tests and ensembles.

Bound directions are part of the contract: ``minimize_over_tests`` returns an
upper bound on the true infimum, ``maximize_over_ensembles_and_tests`` a
lower bound on the true supremum.  Both always evaluate their seed
constructions exactly, so known-optimal configurations are never missed, and
both are deterministic given the seed.  Doubling the restart count reuses the
same child-seed prefix, so a larger budget can only improve the bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize as _nm_minimize

from . import _kernels
from .core import (
    CLASSICAL,
    QUANTUM,
    EffectVec,
    Ensemble,
    ObservationTest,
    StateVec,
    System,
)
from .theories import TheoryModel, qeffect_from_operator, qstate_from_ket, squit_state

_MAX_LP_VARS = 4096


# ---------------------------------------------------------------------------
# Linear programming
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearProgram:
    """maximize objective . x  subject to  A_ub x <= b_ub and lo <= x <= hi."""

    objective: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None


@dataclass(frozen=True)
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float | None
    x: np.ndarray | None


def lp_solve(p: LinearProgram) -> LpResult:
    """Dense two-phase simplex with Bland's anti-cycling rule.

    Infeasibility and unboundedness are reported explicitly in the result
    status, never silently.
    """
    c = np.asarray(p.objective, dtype=float)
    n = c.size
    if n > _MAX_LP_VARS:
        raise ValueError(f"LP exceeds the {_MAX_LP_VARS}-variable cap")
    a = np.asarray(p.a_ub, dtype=float).reshape(-1, n) if np.size(p.a_ub) else np.zeros((0, n))
    b = np.asarray(p.b_ub, dtype=float).reshape(-1)
    lo = np.zeros(n) if p.lo is None else np.asarray(p.lo, dtype=float)
    hi = np.full(n, np.inf) if p.hi is None else np.asarray(p.hi, dtype=float)
    if not np.all(np.isfinite(lo)):
        raise ValueError("lp_solve requires finite lower bounds")

    # shift to u = x - lo >= 0 and append finite upper bounds as rows
    rows = [a]
    rhs = [b - a @ lo]
    finite = np.isfinite(hi)
    if np.any(finite):
        ub_rows = np.eye(n)[finite]
        rows.append(ub_rows)
        rhs.append((hi - lo)[finite])
    a_all = np.vstack(rows)
    b_all = np.concatenate(rhs)
    m = a_all.shape[0]

    # standard form with slacks; flip rows with negative rhs
    full = np.hstack([a_all, np.eye(m)])
    neg = b_all < 0
    full[neg] *= -1.0
    b_std = np.abs(b_all)
    art_rows = np.where(neg)[0]
    n_std = n + m
    n_art = art_rows.size

    tableau = np.zeros((m + 1, n_std + n_art + 1))
    tableau[:m, :n_std] = full
    tableau[:m, -1] = b_std
    basis = np.empty(m, dtype=np.int64)
    for i in range(m):
        basis[i] = n + i  # slack
    for k, i in enumerate(art_rows):
        col = n_std + k
        tableau[i, col] = 1.0
        basis[i] = col

    tol = 1e-11
    max_iter = 50 * (m + n_std) + 10000

    if n_art:
        # phase 1: minimize the sum of artificials
        tableau[m, n_std:n_std + n_art] = 1.0
        for i in range(m):
            if basis[i] >= n_std:
                tableau[m, :] -= tableau[i, :]
        status = _kernels.simplex_pivot(tableau, basis, n_std + n_art, tol, max_iter)
        if status != 0 or -tableau[m, -1] > 1e-8:
            return LpResult("infeasible", None, None)
        # pivot remaining zero-level artificials out where possible
        for i in range(m):
            if basis[i] >= n_std:
                for j in range(n_std):
                    if abs(tableau[i, j]) > 1e-9:
                        piv = tableau[i, j]
                        tableau[i] /= piv
                        for r in range(m + 1):
                            if r != i and tableau[r, j] != 0.0:
                                tableau[r] -= tableau[r, j] * tableau[i]
                        basis[i] = j
                        break

    # phase 2: minimize -objective over the real variables
    cost = np.zeros(n_std + n_art + 1)
    cost[:n] = -c
    tableau[m, :] = cost
    for i in range(m):
        if tableau[m, basis[i]] != 0.0:
            tableau[m, :] -= tableau[m, basis[i]] * tableau[i, :]
    status = _kernels.simplex_pivot(tableau, basis, n_std, tol, max_iter)
    if status == 1:
        return LpResult("unbounded", None, None)
    if status == 2:
        raise RuntimeError("simplex hit the iteration cap")
    u = np.zeros(n_std + n_art)
    for i in range(m):
        u[basis[i]] = tableau[i, -1]
    x = u[:n] + lo
    return LpResult("optimal", float(c @ x), x)


# ---------------------------------------------------------------------------
# Derivative-free searches over tests and ensembles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 8
    max_evals: int = 250
    seed: int = 0
    tol: float = 1e-9

    def __post_init__(self):
        if self.restarts <= 0 or self.max_evals <= 0:
            raise ValueError("restarts and max_evals must be positive")


def _softmax(z: np.ndarray, axis: int = 0) -> np.ndarray:
    z = z - np.max(z, axis=axis, keepdims=True)
    w = np.exp(z)
    return w / np.sum(w, axis=axis, keepdims=True)


class _TestParam:
    """Maps a raw real vector to a valid n-outcome observation test."""

    def __init__(self, theory: TheoryModel, system: System, n_outcomes: int):
        if n_outcomes < 1:
            raise ValueError("tests need at least one outcome")
        self.theory = theory
        self.system = system
        self.n = n_outcomes
        kind = theory.obit.kind
        if kind == CLASSICAL:
            self.raw_dim = self.n * system.dim
        elif kind == QUANTUM:
            self.hdim = int(round(np.sqrt(system.dim)))
            self.raw_dim = self.n * 2 * self.hdim * self.hdim
        else:
            self.raw_dim = 3 + 5 * self.n

    def build(self, raw: np.ndarray) -> ObservationTest:
        kind = self.theory.obit.kind
        n, system = self.n, self.system
        if kind == CLASSICAL:
            w = _softmax(raw.reshape(n, system.dim), axis=0)
            effects = tuple(EffectVec(system, w[j]) for j in range(n))
            return ObservationTest(system, effects)
        if kind == QUANTUM:
            d = self.hdim
            blocks = raw.reshape(n, 2, d, d)
            mats = blocks[:, 0] + 1.0j * blocks[:, 1]
            gram = np.einsum("jab,jac->bc", mats.conj(), mats)
            w, v = np.linalg.eigh(gram)
            inv_sqrt = (v / np.sqrt(np.clip(w, 1e-12, None))) @ v.conj().T
            effects = []
            for j in range(n):
                e = inv_sqrt @ mats[j].conj().T @ mats[j] @ inv_sqrt
                effects.append(qeffect_from_operator(e, system))
            return ObservationTest(system, tuple(effects))
        # squit: mixture of the x-reading, y-reading and trivial tests with
        # outcome-splitting, which always sums exactly to the unit effect
        lam = _softmax(raw[0:3])
        rx = _softmax(raw[3:3 + 2 * n].reshape(2, n), axis=1)
        ry = _softmax(raw[3 + 2 * n:3 + 4 * n].reshape(2, n), axis=1)
        r0 = _softmax(raw[3 + 4 * n:3 + 5 * n])
        xp = np.array([0.5, 0.0, 0.5])
        xm = np.array([-0.5, 0.0, 0.5])
        yp = np.array([0.0, 0.5, 0.5])
        ym = np.array([0.0, -0.5, 0.5])
        unit = np.array([0.0, 0.0, 1.0])
        effects = []
        for j in range(n):
            coords = (
                lam[0] * (rx[0, j] * xp + rx[1, j] * xm)
                + lam[1] * (ry[0, j] * yp + ry[1, j] * ym)
                + lam[2] * r0[j] * unit
            )
            effects.append(EffectVec(system, coords))
        return ObservationTest(system, tuple(effects))

    def canonical_raw(self) -> np.ndarray:
        """Raw coordinates near the theory's fine-grained reading test."""
        big = 30.0
        kind = self.theory.obit.kind
        raw = np.zeros(self.raw_dim)
        if kind == CLASSICAL:
            t = raw.reshape(self.n, self.system.dim)
            for i in range(self.system.dim):
                t[min(i, self.n - 1), i] = big
            return t.reshape(-1)
        if kind == QUANTUM:
            d = self.hdim
            t = raw.reshape(self.n, 2, d, d)
            for i in range(d):
                t[min(i, self.n - 1), 0, i, i] = 1.0
            return t.reshape(-1)
        raw[0] = big  # pure x-reading
        raw[3 + 0 * self.n + 0] = big      # x+ -> outcome 0
        raw[3 + 1 * self.n + min(1, self.n - 1)] = big  # x- -> outcome 1
        return raw


def default_seed_tests(theory: TheoryModel, system: System, n_outcomes: int
                       ) -> list[ObservationTest]:
    """Canonical tests padded with zero effects up to ``n_outcomes``."""
    seeds = []
    kind = theory.obit.kind
    if kind == "squit":
        xs = [squit_xy_test(system, axis=0), squit_xy_test(system, axis=1)]
        half = tuple(
            EffectVec(system, 0.5 * e.coords)
            for t in xs for e in t.effects
        )
        seeds.extend(xs)
        if n_outcomes >= 4:
            seeds.append(ObservationTest(system, half))
    else:
        seeds.append(theory.fine_grained_test(system))
    out = []
    for t in seeds:
        if len(t) <= n_outcomes:
            out.append(pad_test(t, n_outcomes))
    return out


def squit_xy_test(system: System, axis: int) -> ObservationTest:
    if axis == 0:
        effs = (EffectVec(system, np.array([0.5, 0.0, 0.5])),
                EffectVec(system, np.array([-0.5, 0.0, 0.5])))
    else:
        effs = (EffectVec(system, np.array([0.0, 0.5, 0.5])),
                EffectVec(system, np.array([0.0, -0.5, 0.5])))
    return ObservationTest(system, effs)


def pad_test(t: ObservationTest, n_outcomes: int) -> ObservationTest:
    if len(t) > n_outcomes:
        raise ValueError("cannot pad a test down")
    zeros = tuple(
        EffectVec(t.system, np.zeros(t.system.dim)) for _ in range(n_outcomes - len(t))
    )
    return ObservationTest(t.system, t.effects + zeros)


def minimize_over_tests(
    objective: Callable[[ObservationTest], float],
    theory: TheoryModel,
    system: System,
    n_outcomes: int,
    cfg: SearchConfig,
    seed_tests: Sequence[ObservationTest] = (),
) -> tuple[float, ObservationTest]:
    """Multistart Nelder-Mead over parameterized tests.

    Returns an upper bound on the true infimum and the test attaining it.
    Ties break toward the earliest candidate in the seeded order.
    """
    param = _TestParam(theory, system, n_outcomes)
    seeds = list(seed_tests) + default_seed_tests(theory, system, n_outcomes)

    best_val = np.inf
    best_test = None
    for t in seeds:
        v = float(objective(t))
        if v < best_val - 1e-15:
            best_val, best_test = v, t

    def raw_objective(raw: np.ndarray) -> float:
        return float(objective(param.build(raw)))

    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        x0 = param.canonical_raw() if i == 0 else rng.normal(scale=2.0, size=param.raw_dim)
        res = _nm_minimize(
            raw_objective, x0, method="Nelder-Mead",
            options={"maxfev": cfg.max_evals, "fatol": 1e-12, "xatol": 1e-8},
        )
        if res.fun < best_val - 1e-15:
            best_val = float(res.fun)
            best_test = param.build(res.x)
    return best_val, best_test


class _EnsembleParam:
    """Maps a raw vector to an n-member ensemble of pure-ish states."""

    def __init__(self, theory: TheoryModel, system: System, n_members: int):
        self.theory = theory
        self.system = system
        self.n = n_members
        kind = theory.obit.kind
        if kind == CLASSICAL:
            self.member_dim = system.dim
        elif kind == QUANTUM:
            self.hdim = int(round(np.sqrt(system.dim)))
            self.member_dim = 2 * self.hdim
        else:
            self.member_dim = 2
        self.raw_dim = self.n + self.n * self.member_dim

    def build(self, raw: np.ndarray) -> Ensemble:
        w = _softmax(raw[: self.n])
        rest = raw[self.n:].reshape(self.n, self.member_dim)
        kind = self.theory.obit.kind
        members = []
        for j in range(self.n):
            if kind == CLASSICAL:
                s = StateVec(self.system, _softmax(rest[j]))
            elif kind == QUANTUM:
                d = self.hdim
                ket = rest[j, :d] + 1.0j * rest[j, d:]
                if np.linalg.norm(ket) < 1e-12:
                    ket = np.zeros(d, dtype=complex)
                    ket[0] = 1.0
                s = qstate_from_ket(ket, self.system)
            else:
                s = squit_state(np.tanh(rest[j, 0]), np.tanh(rest[j, 1]))
            members.append(s.scaled(float(w[j])))
        return Ensemble(self.system, tuple(members))


def default_seed_ensembles(theory: TheoryModel, system: System, n_members: int
                           ) -> list[Ensemble]:
    """Orthogonal / extremal ensembles with uniform weights."""
    kind = theory.obit.kind
    members: list[StateVec] = []
    if kind == QUANTUM:
        d = int(round(np.sqrt(system.dim)))
        for i in range(min(d, n_members)):
            ket = np.zeros(d, dtype=complex)
            ket[i] = 1.0
            members.append(qstate_from_ket(ket, system))
    elif kind == CLASSICAL:
        for i in range(min(system.dim, n_members)):
            v = np.zeros(system.dim)
            v[i] = 1.0
            members.append(StateVec(system, v))
    else:
        members = [squit_state(1.0, 1.0), squit_state(-1.0, -1.0)][:n_members]
    k = len(members)
    return [Ensemble(system, tuple(s.scaled(1.0 / k) for s in members))]


def maximize_over_ensembles_and_tests(
    objective: Callable[[Ensemble, ObservationTest], float],
    theory: TheoryModel,
    system: System,
    sizes: tuple[int, int],
    cfg: SearchConfig,
    seed_pairs: Sequence[tuple[Ensemble, ObservationTest]] = (),
) -> tuple[float, tuple[Ensemble, ObservationTest]]:
    """Multistart search maximizing over (ensemble, test) pairs.

    Returns a lower bound on the true supremum and the attaining pair.
    """
    n_members, n_outcomes = sizes
    eparam = _EnsembleParam(theory, system, n_members)
    tparam = _TestParam(theory, system, n_outcomes)

    pairs = list(seed_pairs)
    for ens in default_seed_ensembles(theory, system, n_members):
        for t in default_seed_tests(theory, system, n_outcomes):
            pairs.append((ens, t))

    best_val = -np.inf
    best_pair = None
    for ens, t in pairs:
        v = float(objective(ens, t))
        if v > best_val + 1e-15:
            best_val, best_pair = v, (ens, t)

    def raw_objective(raw: np.ndarray) -> float:
        ens = eparam.build(raw[: eparam.raw_dim])
        t = tparam.build(raw[eparam.raw_dim:])
        return -float(objective(ens, t))

    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        if i == 0:
            x0 = np.concatenate([np.zeros(eparam.raw_dim), tparam.canonical_raw()])
        else:
            x0 = rng.normal(scale=2.0, size=eparam.raw_dim + tparam.raw_dim)
        res = _nm_minimize(
            raw_objective, x0, method="Nelder-Mead",
            options={"maxfev": cfg.max_evals, "fatol": 1e-12, "xatol": 1e-8},
        )
        if -res.fun > best_val + 1e-15:
            best_val = -float(res.fun)
            best_pair = (
                eparam.build(res.x[: eparam.raw_dim]),
                tparam.build(res.x[eparam.raw_dim:]),
            )
    return best_val, best_pair

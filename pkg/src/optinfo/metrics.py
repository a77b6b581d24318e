"""Distance and fidelity quantities over the three state spaces.

The operational norm of a state-space vector delta is

    ||delta|| = sup_a (2a - e | delta)

over valid effects a, with e the unit effect.  It reduces to the l1 norm on
classical systems, the trace norm on quantum systems, and a small linear
program over the effect-polytope facets on the squit.  The fidelity between
normalized states is the infimum of the classical Bhattacharyya fidelity of
outcome distributions over observation tests; it has closed forms for
classical (sum_i sqrt(p_i q_i)) and quantum (Tr|sqrt(rho) sqrt(sigma)|)
systems and is reported as a search upper bound on the squit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CLASSICAL,
    QUANTUM,
    SQUIT,
    ChannelMat,
    DimensionMismatchError,
    EffectVec,
    Ensemble,
    ObservationTest,
    StateVec,
    System,
    apply_channel,
    compose_par,
    identity_channel,
    pair,
)
from .optim import (
    LinearProgram,
    SearchConfig,
    lp_solve,
    minimize_over_tests,
    squit_xy_test,
)
from .theories import (
    TheoryModel,
    boxworld_squit,
    coords_to_density,
    pure_decompositions,
    qstate_from_density,
    _rng,
)

_SQUIT_FACET_ROWS = np.array([
    [1.0, 1.0, 1.0],
    [1.0, -1.0, 1.0],
    [-1.0, 1.0, 1.0],
    [-1.0, -1.0, 1.0],
])


def _squit_norm_lp(delta: np.ndarray) -> float:
    """sup over the squit effect polytope, as a 3-variable LP."""
    a_ub = np.vstack([_SQUIT_FACET_ROWS, -_SQUIT_FACET_ROWS])
    b_ub = np.concatenate([np.ones(4), np.zeros(4)])
    res = lp_solve(LinearProgram(
        objective=2.0 * delta,
        a_ub=a_ub,
        b_ub=b_ub,
        lo=np.array([-1.0, -1.0, 0.0]),
        hi=np.array([1.0, 1.0, 1.0]),
    ))
    if res.status != "optimal":
        raise RuntimeError(f"squit norm LP returned {res.status}")
    return float(res.value - delta[2])  # subtract (e | delta)


def squit_norm_vertex(delta: np.ndarray) -> float:
    """Closed form over the six polytope vertices; oracle for the LP path."""
    x, y, n = delta
    return max(abs(x), abs(y), abs(n))


def op_norm(delta: np.ndarray, system: System) -> float:
    """Operational norm of a vector in the real span of the states."""
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (system.dim,):
        raise DimensionMismatchError("vector length does not match system dimension")
    factors = system.factors
    if not factors:
        return abs(float(delta[0]))
    kinds = {f.kind for f in factors}
    if kinds == {CLASSICAL}:
        return float(np.sum(np.abs(delta)))
    if kinds == {QUANTUM}:
        w = np.linalg.eigvalsh(coords_to_density(delta, factors))
        return float(np.sum(np.abs(w)))
    if kinds == {SQUIT}:
        return _squit_norm_lp(delta)
    # classical factors condition the rest blockwise; the norm is additive
    dims = [f.dim for f in factors]
    t = delta.reshape(dims)
    cl = [i for i, f in enumerate(factors) if f.kind == CLASSICAL]
    rest = [i for i in range(len(factors)) if i not in cl]
    t2 = np.transpose(t, cl + rest).reshape(-1, int(np.prod([dims[i] for i in rest])))
    sub = System(tuple(factors[i] for i in rest))
    return float(sum(op_norm(row, sub) for row in t2))


def state_distance(a: StateVec, b: StateVec) -> float:
    if a.system != b.system:
        raise DimensionMismatchError("states live on different systems")
    return op_norm(a.coords - b.coords, a.system)


@dataclass(frozen=True)
class NormMonotonicityReport:
    norm_in: float
    norm_out: float
    ok: bool


def check_norm_monotonicity(delta: np.ndarray, c: ChannelMat,
                            tol: float = 1e-9) -> NormMonotonicityReport:
    """Deterministic channels can only shrink the operational norm."""
    n_in = op_norm(delta, c.in_system)
    n_out = op_norm(c.matrix @ np.asarray(delta, dtype=float), c.out_system)
    return NormMonotonicityReport(n_in, n_out, n_out <= n_in + tol)


# ---------------------------------------------------------------------------
# Fidelity
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FidelityResult:
    value: float
    method: str  # "closed_form" | "search_upper_bound"
    test: ObservationTest | None = None


def bhattacharyya(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sum(np.sqrt(np.clip(p, 0.0, None) * np.clip(q, 0.0, None))))


def test_fidelity(rho: StateVec, sigma: StateVec, test: ObservationTest) -> float:
    """Bhattacharyya fidelity of the outcome distributions under one test."""
    p = np.array([pair(a, rho) for a in test.effects])
    q = np.array([pair(a, sigma) for a in test.effects])
    return bhattacharyya(p, q)


def _uhlmann(rho_mat: np.ndarray, sigma_mat: np.ndarray) -> float:
    w, v = np.linalg.eigh(rho_mat)
    sqrt_rho = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    inner = sqrt_rho @ sigma_mat @ sqrt_rho
    lam = np.linalg.eigvalsh(inner)
    return float(np.sum(np.sqrt(np.clip(lam, 0.0, None))))


def fidelity(rho: StateVec, sigma: StateVec, theory: TheoryModel,
             cfg: SearchConfig | None = None) -> FidelityResult:
    """Fidelity between two normalized states of one system.

    Classical and quantum values are exact: the fine-grained test attains the
    infimum classically, and the measurement-minimized classical fidelity
    equals the Uhlmann closed form Tr|sqrt(rho) sqrt(sigma)| for quantum
    states.  Squit values are upper bounds from a seeded test search and are
    labeled as such.
    """
    if rho.system != sigma.system:
        raise DimensionMismatchError("fidelity needs states on one system")
    for s in (rho, sigma):
        if abs(s.normalization - 1.0) > 1e-7:
            raise ValueError("fidelity is defined for normalized states")
    kind = theory.obit.kind
    if kind == CLASSICAL:
        return FidelityResult(min(1.0, bhattacharyya(rho.coords, sigma.coords)),
                              "closed_form")
    if kind == QUANTUM:
        f = _uhlmann(
            coords_to_density(rho.coords, rho.system.factors),
            coords_to_density(sigma.coords, sigma.system.factors),
        )
        return FidelityResult(min(1.0, f), "closed_form")
    cfg = cfg or SearchConfig(restarts=4, max_evals=120)
    val, test = minimize_over_tests(
        lambda t: test_fidelity(rho, sigma, t),
        theory, rho.system, n_outcomes=4, cfg=cfg,
    )
    return FidelityResult(min(1.0, val), "search_upper_bound", test)


def quantum_fidelity_via_search(rho: StateVec, sigma: StateVec, theory: TheoryModel,
                                cfg: SearchConfig) -> float:
    """Measurement-minimized fidelity for quantum states (oracle cross-check).

    Seeds include the Fuchs-Caves measurement, the eigenbasis of the operator
    rho^(-1/2) |sqrt(rho) sqrt(sigma)| rho^(-1/2), which attains the minimum.
    """
    factors = rho.system.factors
    rm = coords_to_density(rho.coords, factors)
    sm = coords_to_density(sigma.coords, factors)
    w, v = np.linalg.eigh(rm)
    w = np.clip(w, 1e-10, None)
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    sqrt_rho = (v * np.sqrt(w)) @ v.conj().T
    inner = sqrt_rho @ sm @ sqrt_rho
    lw, lv = np.linalg.eigh(inner)
    geo = (lv * np.sqrt(np.clip(lw, 0.0, None))) @ lv.conj().T
    mopt = inv_sqrt @ geo @ inv_sqrt
    _, basis = np.linalg.eigh(mopt)
    from .theories import qeffect_from_operator
    effs = tuple(
        qeffect_from_operator(np.outer(basis[:, i], basis[:, i].conj()), rho.system)
        for i in range(basis.shape[1])
    )
    seed = ObservationTest(rho.system, effs)
    val, _ = minimize_over_tests(
        lambda t: test_fidelity(rho, sigma, t),
        theory, rho.system, n_outcomes=len(effs), cfg=cfg, seed_tests=[seed],
    )
    return val


def fuchs_bounds(rho: StateVec, sigma: StateVec, theory: TheoryModel,
                 cfg: SearchConfig | None = None) -> tuple[float, float, float]:
    """(1 - F, ||rho - sigma|| / 2, sqrt(1 - F^2)).

    For closed-form theories the full chain lower <= middle <= upper is
    checked; when F is a search upper bound only lower <= middle is, since
    the upper end is not direction-safe for a bound on F.
    """
    f = fidelity(rho, sigma, theory, cfg)
    half_norm = 0.5 * state_distance(rho, sigma)
    lower = 1.0 - f.value
    upper = float(np.sqrt(max(0.0, 1.0 - f.value ** 2)))
    tol = 1e-9
    if lower > half_norm + tol:
        raise RuntimeError("Fuchs chain violated: 1-F > ||.||/2")
    if f.method == "closed_form" and half_norm > upper + tol:
        raise RuntimeError("Fuchs chain violated: ||.||/2 > sqrt(1-F^2)")
    return lower, half_norm, upper


def fidelity_pure_input(phi: StateVec, c: ChannelMat, theory: TheoryModel) -> float:
    """Squared fidelity between a pure bipartite state and its image under
    the channel acting on the first factor(s).

    For pure classical or quantum phi this is the pairing of phi's dual
    effect with the output state, i.e. <phi| (C x I)(phi) |phi> in the
    quantum case.
    """
    if theory.obit.kind == SQUIT:
        raise ValueError("pure-input fidelity is defined for classical/quantum")
    if not theory.is_pure(phi):
        raise ValueError("input state must be pure")
    n_front = len(c.in_system.factors)
    ancilla = System(phi.system.factors[n_front:])
    big = compose_par(c, identity_channel(ancilla)) if ancilla.factors else c
    out = apply_channel(big, phi)
    return float(np.clip(phi.coords @ out.coords, 0.0, 1.0))


def correlation_fidelity(rho: StateVec, c: ChannelMat, theory: TheoryModel,
                         cfg: SearchConfig | None = None,
                         n_dilations: int = 6, seed: int = 0) -> float:
    """Worst-case squared fidelity between a dilation and its channel image.

    Quantum systems use only the canonical purification, which attains the
    infimum when purification is essentially unique.  Classical systems
    minimize over the copy dilation and sampled random dilations.  The result
    is an upper bound on the true infimum over all dilations.
    """
    if not c.deterministic:
        raise ValueError("correlation fidelity needs a deterministic channel")
    if c.in_system != rho.system or c.out_system != rho.system:
        raise DimensionMismatchError("channel must act on the state's system")
    from .compression import dilation_family  # local import; no cycle at call time

    kind = theory.obit.kind
    if kind == QUANTUM:
        dils = dilation_family(rho, theory, n_random=0, seed=seed)
        phi = dils[0].joint
        return fidelity_pure_input(phi, c, theory)
    if kind == CLASSICAL:
        best = 1.0
        for dil in dilation_family(rho, theory, n_random=n_dilations, seed=seed):
            anc = dil.ancilla_system
            big = compose_par(c, identity_channel(anc)) if anc.factors else c
            out = apply_channel(big, dil.joint)
            f = bhattacharyya(dil.joint.coords, out.coords)
            best = min(best, f * f)
        return best
    # squit: block fidelity over sampled classically-correlated dilations
    cfg = cfg or SearchConfig(restarts=2, max_evals=60)
    rng = _rng(seed)
    best = None
    candidates = [Ensemble(rho.system, (rho,))]
    candidates.extend(pure_decompositions(rho, theory, budget=2, seed=rng))
    sq = boxworld_squit()
    for ens in candidates:
        total = 0.0
        for member in ens.members:
            w = member.normalization
            if w < 1e-12:
                continue
            s = member.scaled(1.0 / w)
            out = apply_channel(c, s)
            f = fidelity(s, StateVec(s.system, out.coords), sq, cfg)
            total += w * f.value
        val = total * total
        best = val if best is None else min(best, val)
    return float(best)

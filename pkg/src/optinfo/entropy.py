"""Entropy-like functionals and the classical-information criterion machinery.

Includes Shannon and von Neumann entropies, mutual information of joint
outcome distributions, the preparation/observation joint distributions of a
compression scheme, the normalized mutual-information criterion with
L = log2(mn - 1), the continuity bound 3*gamma + 3*H2(gamma)/L, and the
three GPT entropies (measurement, decomposition, accessible information)
with explicit bound directions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CLASSICAL,
    QUANTUM,
    ChannelMat,
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
    SearchConfig,
    maximize_over_ensembles_and_tests,
    minimize_over_tests,
    pad_test,
    squit_xy_test,
)
from .theories import (
    TheoryModel,
    coords_to_density,
    pure_decompositions,
    qeffect_from_operator,
)


def shannon(p) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    if np.any(p < -1e-12):
        raise ValueError("probabilities must be nonnegative")
    p = np.clip(p, 0.0, None)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def binary_entropy(gamma: float) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("binary entropy needs gamma in [0, 1]")
    return shannon([gamma, 1.0 - gamma])


def von_neumann(rho: StateVec) -> float:
    """Entropy of the eigenvalue distribution of a normalized quantum state."""
    if rho.system.theory_id != QUANTUM:
        raise ValueError("von Neumann entropy is defined for quantum states")
    w = np.linalg.eigvalsh(coords_to_density(rho.coords, rho.system.factors))
    w = np.clip(w, 0.0, None)
    return shannon(w / np.sum(w))


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Joint outcome distribution p_ij over (preparation i, observation j)."""

    matrix: np.ndarray
    row_labels: tuple | None = None
    col_labels: tuple | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError("joint distribution must be a matrix")
        if np.any(m < -1e-9):
            raise ValueError("joint distribution has negative entries")
        if abs(m.sum() - 1.0) > 1e-9:
            raise ValueError("joint distribution entries must sum to 1")
        object.__setattr__(self, "matrix", np.clip(m, 0.0, None))

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


def mutual_information(j: JointDistribution) -> float:
    """I(X:Y) in bits, safe for zero rows and columns."""
    m = j.matrix
    r = m.sum(axis=1)
    c = m.sum(axis=0)
    out = 0.0
    for i in range(m.shape[0]):
        if r[i] <= 0:
            continue
        for k in range(m.shape[1]):
            v = m[i, k]
            if v > 0 and c[k] > 0:
                out += v * np.log2(v / (r[i] * c[k]))
    return max(0.0, float(out))


def ensemble_test_joint(ens: Ensemble, test: ObservationTest) -> JointDistribution:
    m = np.array([[pair(a, s) for a in test.effects] for s in ens.members])
    total = m.sum()
    if total <= 0:
        raise ValueError("degenerate ensemble/test pair")
    return JointDistribution(np.clip(m, 0.0, None) / total)


def scheme_joint_dists(ens: Ensemble, test: ObservationTest, c: ChannelMat
                       ) -> tuple[JointDistribution, JointDistribution]:
    """Joint distributions before (p) and after (q) inserting the channel.

    ``ens`` refines a dilation: members live on (channel input x ancilla),
    with the channel acting on the leading factors.
    """
    n_front = len(c.in_system.factors)
    sys_a, sys_anc = ens.system.split(n_front)
    if sys_a != c.in_system:
        raise ValueError("channel does not act on the leading factors of the ensemble")
    big = compose_par(c, identity_channel(sys_anc)) if sys_anc.factors else c
    p = np.array([[pair(a, s) for a in test.effects] for s in ens.members])
    q = np.array([[pair(a, apply_channel(big, s)) for a in test.effects]
                  for s in ens.members])
    return JointDistribution(np.clip(p, 0, None) / p.sum()), \
        JointDistribution(np.clip(q, 0, None) / q.sum())


@dataclass(frozen=True)
class CriterionValue:
    """Normalized mutual-information defect |I(X:Y) - I(X:Y~)| / L."""

    value: float
    L: float
    m: int
    n: int


def classical_criterion(ens: Ensemble, test: ObservationTest, c: ChannelMat
                        ) -> CriterionValue:
    """The per-scheme value inside the classical-information criterion.

    m is the test size, n the ensemble size; L = log2(mn - 1).  With m = 1 or
    n = 1 both mutual informations vanish and the value is 0 (the smallest
    relevant L is log2 3).
    """
    m, n = len(test), len(ens)
    if m == 1 or n == 1:
        ll = float(np.log2(m * n - 1)) if m * n >= 2 else 0.0
        return CriterionValue(0.0, ll, m, n)
    ll = float(np.log2(m * n - 1))
    jp, jq = scheme_joint_dists(ens, test, c)
    val = abs(mutual_information(jp) - mutual_information(jq)) / ll
    return CriterionValue(float(val), ll, m, n)


def continuity_bound(gamma: float, L: float) -> float:
    """3*gamma + 3*H2(gamma)/L, valid for 0 <= gamma < 1 - 1/(mn)."""
    if L <= 0:
        raise ValueError("L must be positive")
    mn = 2.0 ** L + 1.0
    if not 0.0 <= gamma < 1.0 - 1.0 / mn:
        raise ValueError("gamma outside the validity range of the bound")
    return 3.0 * gamma + 3.0 * binary_entropy(gamma) / L


def ic_lower_bound(i0: float, obit_dim_log: float) -> float:
    """Classical-criterion lower bound I0 / log2(D1) on the information content.

    Combined with the ordering I >= I^C this bounds the compression rate of
    the state whose single-copy optimal mutual information is ``i0``.
    """
    if obit_dim_log <= 0:
        raise ValueError("obit dimension log must be positive")
    if i0 < 0:
        raise ValueError("mutual information cannot be negative")
    return i0 / obit_dim_log


# ---------------------------------------------------------------------------
# GPT entropies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntropyValue:
    value: float
    bound_direction: str  # "exact" | "upper" | "lower"


def _outcome_entropy(rho: StateVec, test: ObservationTest) -> float:
    p = np.array([pair(a, rho) for a in test.effects])
    p = np.clip(p, 0.0, None)
    s = p.sum()
    return shannon(p / s) if s > 0 else 0.0


def measurement_entropy(rho: StateVec, theory: TheoryModel,
                        cfg: SearchConfig | None = None) -> EntropyValue:
    """Minimum outcome entropy over tests of atomic (extremal-ray) effects.

    Classical systems: atomic tests only refine the state's distribution, so
    the value is H(p) exactly.  Qubits: the eigenbasis measurement attains
    S(rho).  Other systems are searched and reported as upper bounds.
    """
    kind = theory.obit.kind
    if kind == CLASSICAL:
        return EntropyValue(shannon(rho.coords / rho.normalization), "exact")
    if kind == QUANTUM and theory.obit.size == 2 and len(rho.system.factors) == 1:
        return EntropyValue(von_neumann(rho), "exact")
    cfg = cfg or SearchConfig(restarts=4, max_evals=150)
    if kind == QUANTUM:
        # rank-1 POVM search seeded with the eigenbasis measurement
        w, v = np.linalg.eigh(coords_to_density(rho.coords, rho.system.factors))
        effs = tuple(
            qeffect_from_operator(np.outer(v[:, i], v[:, i].conj()), rho.system)
            for i in range(v.shape[1])
        )
        seed = ObservationTest(rho.system, effs)
        val, _ = minimize_over_tests(
            lambda t: _outcome_entropy(rho, t),
            theory, rho.system, n_outcomes=len(effs), cfg=cfg, seed_tests=[seed],
        )
        return EntropyValue(val, "upper")
    # squit atomic tests: the x and y readings and their weighted unions;
    # splitting outcomes only increases entropy, so seeds attain the optimum
    sx = squit_xy_test(rho.system, axis=0)
    sy = squit_xy_test(rho.system, axis=1)

    def atomic_entropy(t_raw: np.ndarray) -> float:
        tx = 1.0 / (1.0 + np.exp(-t_raw[0]))
        x, y, n = rho.coords / rho.normalization
        probs = np.array([
            tx * (n + x) / 2, tx * (n - x) / 2,
            (1 - tx) * (n + y) / 2, (1 - tx) * (n - y) / 2,
        ])
        return shannon(np.clip(probs, 0, None))

    best = min(_outcome_entropy(rho, sx), _outcome_entropy(rho, sy))
    from scipy.optimize import minimize as _nm
    for t0 in (-3.0, 0.0, 3.0):
        res = _nm(atomic_entropy, np.array([t0]), method="Nelder-Mead",
                  options={"maxfev": cfg.max_evals})
        best = min(best, float(res.fun))
    return EntropyValue(best, "upper")


def decomposition_entropy(rho: StateVec, theory: TheoryModel,
                          cfg: SearchConfig | None = None,
                          seed: int = 0) -> EntropyValue:
    """Minimum weight entropy over pure decompositions of the state."""
    budget = (cfg.restarts * 2) if cfg else 8
    best = np.inf
    for ens in pure_decompositions(rho, theory, budget=budget, seed=seed):
        w = ens.weights()
        best = min(best, shannon(w / w.sum()))
    direction = "exact" if theory.obit.kind == CLASSICAL else "upper"
    return EntropyValue(float(best), direction)


def accessible_information(theory: TheoryModel, system: System,
                           cfg: SearchConfig | None = None,
                           sizes: tuple[int, int] | None = None) -> EntropyValue:
    """Best mutual information between preparations and measurements.

    A lower bound on the supremum; the orthogonal/extremal seed ensembles
    with reading tests realize the known-optimal constructions.
    """
    cfg = cfg or SearchConfig(restarts=4, max_evals=200)
    if sizes is None:
        k = system.dim if theory.obit.kind == CLASSICAL else (
            theory.obit.size if theory.obit.kind == QUANTUM else 4)
        sizes = (k, max(k, 2))
    val, _ = maximize_over_ensembles_and_tests(
        lambda ens, t: mutual_information(ensemble_test_joint(ens, t)),
        theory, system, sizes, cfg,
    )
    return EntropyValue(float(val), "lower")


def state_accessible_information(rho: StateVec, theory: TheoryModel,
                                 cfg: SearchConfig | None = None,
                                 seed: int = 0) -> EntropyValue:
    """Best mutual information over refinements of ``rho`` and tests.

    This is the single-copy quantity feeding ``ic_lower_bound``.  The
    eigendecomposition (or unique classical decomposition) paired with its
    reading test is always evaluated, so mixed states give a positive value
    and pure states give zero.
    """
    cfg = cfg or SearchConfig(restarts=2, max_evals=120)
    decs = pure_decompositions(rho, theory, budget=max(2, cfg.restarts), seed=seed)
    best = 0.0
    for i, ens in enumerate(decs):
        if len(ens) == 1:
            continue  # trivial refinement carries no correlation
        seeds = []
        if theory.obit.kind == QUANTUM:
            mats = [coords_to_density(m.coords, rho.system.factors) for m in ens.members]
            vecs = []
            for m in mats:
                w, v = np.linalg.eigh(m)
                vecs.append(v[:, -1])
            effs = []
            gram = sum(np.outer(v, v.conj()) for v in vecs)
            w, u = np.linalg.eigh(gram)
            inv_sqrt = (u / np.sqrt(np.clip(w, 1e-12, None))) @ u.conj().T
            for v in vecs:
                k = inv_sqrt @ v
                effs.append(qeffect_from_operator(np.outer(k, k.conj()), rho.system))
            seeds.append(ObservationTest(rho.system, tuple(effs)))
        n_out = max(len(ens), 2)
        seeds = [pad_test(t, n_out) for t in seeds if len(t) <= n_out]
        val, _ = minimize_over_tests(
            lambda t: -mutual_information(ensemble_test_joint(ens, t)),
            theory, rho.system, n_outcomes=n_out,
            cfg=SearchConfig(restarts=1 if i else cfg.restarts,
                             max_evals=cfg.max_evals, seed=cfg.seed),
            seed_tests=seeds,
        )
        best = max(best, -val)
    return EntropyValue(float(best), "lower")

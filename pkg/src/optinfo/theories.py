"""Concrete state-space models: classical simplex, quantum, box-world squit.

The quantum model stores everything in an orthonormal Hermitian operator
basis (identity/sqrt(d) plus a traceless orthonormal set), so states,
effects and channels of all three theories live in one real-vector core.
Complex linear algebra is confined to this module.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product

import numpy as np

from .core import (
    CLASSICAL,
    QUANTUM,
    SQUIT,
    ChannelMat,
    DilationState,
    EffectVec,
    Ensemble,
    Factor,
    ObservationTest,
    StateVec,
    System,
    TOL_SUM,
    UnsupportedCompositionError,
    compose_par,
    condition_on_ancilla,
    marginalize,
    unit_effect,
)

_HILBERT_CAP = 64  # largest Hilbert dimension for explicit operator reconstruction


# ---------------------------------------------------------------------------
# Hermitian operator basis
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal Hermitian basis of shape (d*d, d, d), first element I/sqrt(d).

    Orthonormality is in the Hilbert-Schmidt inner product, so the real
    coordinates of a Hermitian operator X are Tr(X B_k) and probabilities are
    Euclidean pairings of coordinate vectors.
    """
    basis = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1.0 / np.sqrt(2.0)
            basis.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1.0j / np.sqrt(2.0)
            m[k, j] = 1.0j / np.sqrt(2.0)
            basis.append(m)
    for l in range(1, d):
        m = np.zeros((d, d), dtype=complex)
        m[np.arange(l), np.arange(l)] = 1.0
        m[l, l] = -float(l)
        basis.append(m / np.sqrt(l * (l + 1)))
    return np.stack(basis, axis=0)


def _quantum_dims(factors) -> list[int]:
    return [f.size for f in factors]


def coords_to_density(coords: np.ndarray, factors) -> np.ndarray:
    """Reconstruct the operator of an all-quantum system from real coordinates."""
    dims = _quantum_dims(factors)
    hdim = int(np.prod(dims))
    if hdim > _HILBERT_CAP:
        raise ValueError(f"Hilbert dimension {hdim} exceeds reconstruction cap {_HILBERT_CAP}")
    t = np.asarray(coords, dtype=complex).reshape([d * d for d in dims])
    # contract factor k-axes one at a time: v[k...] B[k,a,b] -> (..., a, b)
    for i, d in enumerate(dims):
        b = hermitian_basis(d)
        t = np.tensordot(t, b, axes=([0], [0]))  # consumed axes move to the end
    # axes are now (a1, b1, a2, b2, ...); bring to (a1, a2, ..., b1, b2, ...)
    n = len(dims)
    perm = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    t = np.transpose(t, perm)
    return t.reshape(hdim, hdim)


def density_to_coords(mat: np.ndarray, factors) -> np.ndarray:
    """Real coordinates of a Hermitian operator on an all-quantum system."""
    dims = _quantum_dims(factors)
    n = len(dims)
    t = np.asarray(mat, dtype=complex).reshape(dims + dims)
    # interleave to (a1, b1, a2, b2, ...), then contract each factor with Tr(X B)
    perm = [val for pair in zip(range(n), range(n, 2 * n)) for val in pair]
    t = np.transpose(t, perm)
    for d in dims:
        b = hermitian_basis(d)
        # Tr(X B_k) over this factor: sum_ab X[..., a, b] B[k, b, a]
        t = np.tensordot(t, b, axes=([0, 1], [2, 1]))
    return np.real(t.reshape(-1))


def qstate_from_density(rho: np.ndarray, system: System) -> StateVec:
    return StateVec(system, density_to_coords(rho, system.factors))


def qstate_from_ket(ket: np.ndarray, system: System) -> StateVec:
    ket = np.asarray(ket, dtype=complex)
    ket = ket / np.linalg.norm(ket)
    return qstate_from_density(np.outer(ket, ket.conj()), system)


def qeffect_from_operator(e: np.ndarray, system: System) -> EffectVec:
    return EffectVec(system, density_to_coords(e, system.factors))


def classical_state(p, system: System | None = None) -> StateVec:
    p = np.asarray(p, dtype=float)
    if system is None:
        system = System((Factor(CLASSICAL, p.size),))
    return StateVec(system, p)


def squit_state(x: float, y: float, n: float = 1.0) -> StateVec:
    return StateVec(System((Factor(SQUIT),)), np.array([x, y, n], dtype=float))


def squit_effect(gamma: float, alpha: float, beta: float) -> EffectVec:
    """Effect gamma*n + alpha*x + beta*y, stored in state-coordinate order."""
    return EffectVec(System((Factor(SQUIT),)), np.array([alpha, beta, gamma], dtype=float))


# ---------------------------------------------------------------------------
# Cone membership and effect validity
# ---------------------------------------------------------------------------


def _positivity_residual(factors, coords: np.ndarray) -> float:
    if not factors:
        return max(0.0, -float(coords[0]))
    kinds = {f.kind for f in factors}
    if kinds == {CLASSICAL}:
        return max(0.0, -float(np.min(coords)))
    if kinds == {QUANTUM}:
        w = np.linalg.eigvalsh(coords_to_density(coords, factors))
        return max(0.0, -float(w[0]))
    if kinds == {SQUIT}:
        x, y, n = coords
        return max(0.0, -n, abs(x) - n, abs(y) - n)
    # mixed composite: condition on the classical factors blockwise
    dims = [f.dim for f in factors]
    t = np.asarray(coords).reshape(dims)
    cl = [i for i, f in enumerate(factors) if f.kind == CLASSICAL]
    rest = [i for i in range(len(factors)) if i not in cl]
    block_dim = int(np.prod([dims[i] for i in rest])) if rest else 1
    t2 = np.transpose(t, cl + rest).reshape(-1, block_dim)
    sub = [factors[i] for i in rest]
    if not sub:
        return max(0.0, -float(np.min(t2)))
    return max(_positivity_residual(sub, row) for row in t2)


def state_residual(s: StateVec) -> float:
    """Distance-like violation of cone membership plus normalization <= 1."""
    return max(
        _positivity_residual(s.system.factors, s.coords),
        max(0.0, s.normalization - 1.0),
    )


def _effect_residual(factors, coords: np.ndarray) -> float:
    if not factors:
        c = float(coords[0])
        return max(0.0, -c, c - 1.0)
    kinds = {f.kind for f in factors}
    if kinds == {CLASSICAL}:
        return max(0.0, -float(np.min(coords)), float(np.max(coords)) - 1.0)
    if kinds == {QUANTUM}:
        w = np.linalg.eigvalsh(coords_to_density(coords, factors))
        return max(0.0, -float(w[0]), float(w[-1]) - 1.0)
    if kinds == {SQUIT}:
        alpha, beta, gamma = coords
        low = gamma - abs(alpha) - abs(beta)
        high = gamma + abs(alpha) + abs(beta)
        return max(0.0, -low, high - 1.0)
    dims = [f.dim for f in factors]
    t = np.asarray(coords).reshape(dims)
    cl = [i for i, f in enumerate(factors) if f.kind == CLASSICAL]
    rest = [i for i in range(len(factors)) if i not in cl]
    block_dim = int(np.prod([dims[i] for i in rest])) if rest else 1
    t2 = np.transpose(t, cl + rest).reshape(-1, block_dim)
    sub = [factors[i] for i in rest]
    if not sub:
        return max(0.0, -float(np.min(t2)), float(np.max(t2)) - 1.0)
    return max(_effect_residual(sub, row) for row in t2)


def effect_residual(a: EffectVec) -> float:
    return _effect_residual(a.system.factors, a.coords)


# ---------------------------------------------------------------------------
# Quantum channels
# ---------------------------------------------------------------------------


def quantum_channel_from_kraus(kraus, sys_in: System, sys_out: System,
                               deterministic: bool = True) -> ChannelMat:
    """Real channel matrix of X -> sum_i K_i X K_i^dagger."""
    fin, fout = sys_in.factors, sys_out.factors
    din = sys_in.dim
    mat = np.zeros((sys_out.dim, din))
    for l in range(din):
        basis_coords = np.zeros(din)
        basis_coords[l] = 1.0
        bl = coords_to_density(basis_coords, fin)
        out = sum(k @ bl @ k.conj().T for k in kraus)
        mat[:, l] = density_to_coords(out, fout)
    return ChannelMat(sys_in, sys_out, mat, deterministic=deterministic)


def apply_channel_to_operator(c: ChannelMat, x: np.ndarray) -> np.ndarray:
    """Act with a quantum channel on an arbitrary (complex) operator."""
    h1 = (x + x.conj().T) / 2.0
    h2 = (x - x.conj().T) / 2.0j
    fin, fout = c.in_system.factors, c.out_system.factors
    y1 = coords_to_density(c.matrix @ density_to_coords(h1, fin), fout)
    y2 = coords_to_density(c.matrix @ density_to_coords(h2, fin), fout)
    return y1 + 1.0j * y2


def choi_matrix(c: ChannelMat) -> np.ndarray:
    """Normalized Choi matrix J = (C x I)(|Omega><Omega|) / d_in."""
    din = int(np.prod(_quantum_dims(c.in_system.factors)))
    dout = int(np.prod(_quantum_dims(c.out_system.factors)))
    j = np.zeros((dout * din, dout * din), dtype=complex)
    for i in range(din):
        for k in range(din):
            e = np.zeros((din, din), dtype=complex)
            e[i, k] = 1.0
            block = apply_channel_to_operator(c, e)
            j += np.kron(block, e)
    return j / din


def choi_residual(c: ChannelMat) -> tuple[float, float]:
    """(complete-positivity violation, trace-preservation violation)."""
    j = choi_matrix(c)
    w = np.linalg.eigvalsh(j)
    cp = max(0.0, -float(w[0]))
    din = int(np.prod(_quantum_dims(c.in_system.factors)))
    dout = j.shape[0] // din
    jt = j.reshape(dout, din, dout, din)
    red = np.trace(jt, axis1=0, axis2=2)  # partial trace over the output
    tp = float(np.max(np.abs(red - np.eye(din) / din)))
    return cp, tp


# ---------------------------------------------------------------------------
# Squit channel constructors
# ---------------------------------------------------------------------------

_SQUIT_CORNERS = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]


def squit_symmetry_channel(index: int) -> ChannelMat:
    """One of the eight dihedral symmetries of the square."""
    rotations = [
        np.array([[1.0, 0.0], [0.0, 1.0]]),
        np.array([[0.0, -1.0], [1.0, 0.0]]),
        np.array([[-1.0, 0.0], [0.0, -1.0]]),
        np.array([[0.0, 1.0], [-1.0, 0.0]]),
    ]
    r = rotations[index % 4]
    if index >= 4:
        r = r @ np.array([[1.0, 0.0], [0.0, -1.0]])
    m = np.eye(3)
    m[:2, :2] = r
    sq = System((Factor(SQUIT),))
    return ChannelMat(sq, sq, m, deterministic=True)


def squit_contraction_channel(lam: float, cx: float, cy: float) -> ChannelMat:
    """Shrink the square by lam toward the interior point (cx, cy)."""
    m = np.array([
        [lam, 0.0, (1.0 - lam) * cx],
        [0.0, lam, (1.0 - lam) * cy],
        [0.0, 0.0, 1.0],
    ])
    sq = System((Factor(SQUIT),))
    return ChannelMat(sq, sq, m, deterministic=True)


def squit_measure_prepare_channel(axis: int, s_plus: StateVec, s_minus: StateVec) -> ChannelMat:
    """Measure the x (axis=0) or y (axis=1) reading test, prepare s_plus/s_minus."""
    e_plus = np.array([0.5, 0.0, 0.5]) if axis == 0 else np.array([0.0, 0.5, 0.5])
    e_minus = np.array([-0.5, 0.0, 0.5]) if axis == 0 else np.array([0.0, -0.5, 0.5])
    m = np.outer(s_plus.coords, e_plus) + np.outer(s_minus.coords, e_minus)
    sq = System((Factor(SQUIT),))
    return ChannelMat(sq, sq, m, deterministic=True)


# ---------------------------------------------------------------------------
# TheoryModel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TheoryModel:
    """A pluggable state-space model built from one elementary system (obit)."""

    theory_id: str
    obit: Factor

    # -- systems -----------------------------------------------------------
    def system(self, copies: int = 1) -> System:
        if copies == 0:
            return System(())
        if self.obit.kind == SQUIT and copies > 1:
            raise UnsupportedCompositionError("squit x squit composites are not defined")
        return System(tuple(self.obit for _ in range(copies)))

    @property
    def obit_dim(self) -> int:
        """Linear dimension of the elementary system."""
        return self.obit.dim

    def linear_dim(self, copies: int) -> int:
        """Size D(N) of N parallel copies (composition-rule bookkeeping)."""
        return self.obit.dim ** copies

    # -- validity oracles ---------------------------------------------------
    def state_residual(self, s: StateVec) -> float:
        return state_residual(s)

    def contains_state(self, s: StateVec, tol: float = TOL_SUM) -> bool:
        return state_residual(s) <= tol

    def effect_residual(self, a: EffectVec) -> float:
        return effect_residual(a)

    def effect_is_valid(self, a: EffectVec, tol: float = TOL_SUM) -> bool:
        return effect_residual(a) <= tol

    # -- structure ----------------------------------------------------------
    def effect_facets(self) -> list[tuple[np.ndarray, float]]:
        """Linear facets (w, c), meaning w . a + c >= 0, of the elementary
        effect polytope.  Quantum effects are not polytopal: returns []."""
        if self.obit.kind == CLASSICAL:
            d = self.obit.size
            facets = []
            for i in range(d):
                e = np.zeros(d)
                e[i] = 1.0
                facets.append((e.copy(), 0.0))
                facets.append((-e, 1.0))
            return facets
        if self.obit.kind == SQUIT:
            facets = []
            for s1, s2 in product((1.0, -1.0), repeat=2):
                w = np.array([s1, s2, 1.0])
                facets.append((w, 0.0))
                facets.append((-w, 1.0))
            return facets
        return []

    def pure_states(self, system: System | None = None) -> list[StateVec]:
        """Enumerate pure states (classical, squit); quantum is parameterized."""
        system = system or self.system(1)
        if self.obit.kind == QUANTUM:
            raise ValueError("quantum pure states are parameterized, not enumerable")
        if self.obit.kind == SQUIT:
            return [squit_state(x, y) for x, y in _SQUIT_CORNERS]
        states = []
        for idx in product(*[range(f.size) for f in system.factors]):
            v = np.ones(1)
            for f, i in zip(system.factors, idx):
                e = np.zeros(f.size)
                e[i] = 1.0
                v = np.kron(v, e)
            states.append(StateVec(system, v))
        return states

    def extremal_effects(self, system: System | None = None) -> list[EffectVec]:
        """Nontrivial extremal effects of the elementary system."""
        system = system or self.system(1)
        if self.obit.kind == CLASSICAL:
            d = self.obit.size
            out = []
            for bits in product((0.0, 1.0), repeat=d):
                if any(bits) and not all(bits):
                    out.append(EffectVec(system, np.array(bits)))
            return out
        if self.obit.kind == SQUIT:
            return [
                squit_effect(0.5, 0.5, 0.0),
                squit_effect(0.5, -0.5, 0.0),
                squit_effect(0.5, 0.0, 0.5),
                squit_effect(0.5, 0.0, -0.5),
            ]
        raise ValueError("quantum extremal effects are parameterized, not enumerable")

    def atomic_effects(self, system: System | None = None) -> list[EffectVec]:
        """One representative per extremal ray of the effect cone."""
        system = system or self.system(1)
        if self.obit.kind == CLASSICAL:
            d = self.obit.size
            out = []
            for i in range(d):
                e = np.zeros(d)
                e[i] = 1.0
                out.append(EffectVec(system, e))
            return out
        if self.obit.kind == SQUIT:
            return self.extremal_effects(system)
        raise ValueError("quantum atomic effects are parameterized, not enumerable")

    def fine_grained_test(self, system: System | None = None) -> ObservationTest:
        """The canonical reading test of the elementary system."""
        system = system or self.system(1)
        if self.obit.kind == CLASSICAL:
            effs = []
            for i in range(system.dim):
                e = np.zeros(system.dim)
                e[i] = 1.0
                effs.append(EffectVec(system, e))
            return ObservationTest(system, tuple(effs))
        if self.obit.kind == QUANTUM:
            d = int(np.prod(_quantum_dims(system.factors)))
            effs = []
            for i in range(d):
                e = np.zeros((d, d), dtype=complex)
                e[i, i] = 1.0
                effs.append(qeffect_from_operator(e, system))
            return ObservationTest(system, tuple(effs))
        return ObservationTest(system, (squit_effect(0.5, 0.5, 0.0), squit_effect(0.5, -0.5, 0.0)))

    def is_pure(self, s: StateVec, tol: float = 1e-7) -> bool:
        """Atomicity test for a normalized state."""
        n = s.normalization
        if self.obit.kind == CLASSICAL:
            return float(np.max(s.coords)) >= n - tol
        if self.obit.kind == SQUIT:
            x, y, nn = s.coords
            return abs(abs(x) - nn) <= tol and abs(abs(y) - nn) <= tol
        w = np.linalg.eigvalsh(coords_to_density(s.coords, s.system.factors))
        return float(w[-1]) >= n - tol


def classical_theory(d: int) -> TheoryModel:
    """Sub-stochastic vectors in R^d; pure states are the basis vectors."""
    if d < 2:
        raise ValueError("classical systems need d >= 2")
    return TheoryModel(CLASSICAL, Factor(CLASSICAL, d))


def quantum_theory(d: int) -> TheoryModel:
    """Sub-normalized density matrices on C^d, in real Hermitian coordinates."""
    if d < 2:
        raise ValueError("quantum systems need d >= 2")
    return TheoryModel(QUANTUM, Factor(QUANTUM, d))


def boxworld_squit() -> TheoryModel:
    """The square-state-space system with four pure corner states."""
    return TheoryModel("boxworld", Factor(SQUIT))


def theory_from_string(spec: str) -> TheoryModel:
    """Parse CLI-style theory strings: 'classical:d', 'quantum:d', 'squit'."""
    name, _, arg = spec.partition(":")
    if name == "classical":
        return classical_theory(int(arg or 2))
    if name == "quantum":
        return quantum_theory(int(arg or 2))
    if name in ("squit", "boxworld"):
        return boxworld_squit()
    raise ValueError(f"unknown theory {spec!r}")


# ---------------------------------------------------------------------------
# Seeded random sampling
# ---------------------------------------------------------------------------


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_state(theory: TheoryModel, system: System, seed, pure: bool = False) -> StateVec:
    rng = _rng(seed)
    kinds = {f.kind for f in system.factors}
    if kinds == {CLASSICAL}:
        if pure:
            i = rng.integers(system.dim)
            v = np.zeros(system.dim)
            v[i] = 1.0
            return StateVec(system, v)
        return StateVec(system, rng.dirichlet(np.ones(system.dim)))
    if kinds == {QUANTUM}:
        hdim = int(np.prod(_quantum_dims(system.factors)))
        if pure:
            ket = rng.normal(size=hdim) + 1.0j * rng.normal(size=hdim)
            return qstate_from_ket(ket, system)
        g = rng.normal(size=(hdim, hdim)) + 1.0j * rng.normal(size=(hdim, hdim))
        rho = g @ g.conj().T
        rho /= np.trace(rho).real
        return qstate_from_density(rho, system)
    if kinds == {SQUIT}:
        if pure:
            x, y = _SQUIT_CORNERS[rng.integers(4)]
            return squit_state(x, y)
        return squit_state(rng.uniform(-1, 1), rng.uniform(-1, 1))
    raise ValueError("random_state supports single-theory systems only")


def random_effect(theory: TheoryModel, system: System, seed) -> EffectVec:
    rng = _rng(seed)
    kinds = {f.kind for f in system.factors}
    if kinds == {CLASSICAL}:
        return EffectVec(system, rng.uniform(0.0, 1.0, size=system.dim))
    if kinds == {QUANTUM}:
        hdim = int(np.prod(_quantum_dims(system.factors)))
        g = rng.normal(size=(hdim, hdim)) + 1.0j * rng.normal(size=(hdim, hdim))
        q, _ = np.linalg.qr(g)
        e = q @ np.diag(rng.uniform(0.0, 1.0, size=hdim)) @ q.conj().T
        return qeffect_from_operator(e, system)
    if kinds == {SQUIT}:
        vertices = np.array([
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.0, 0.5],
            [-0.5, 0.0, 0.5],
            [0.0, 0.5, 0.5],
            [0.0, -0.5, 0.5],
        ])
        w = rng.dirichlet(np.ones(len(vertices)))
        return EffectVec(system, w @ vertices)
    raise ValueError("random_effect supports single-theory systems only")


def random_channel(theory: TheoryModel, sys_in: System, sys_out: System, seed) -> ChannelMat:
    """A random deterministic channel; identical seed gives identical output."""
    rng = _rng(seed)
    kind = theory.obit.kind
    if kind == CLASSICAL:
        cols = np.stack(
            [rng.dirichlet(np.ones(sys_out.dim)) for _ in range(sys_in.dim)], axis=1
        )
        return ChannelMat(sys_in, sys_out, cols, deterministic=True)
    if kind == QUANTUM:
        din = int(np.prod(_quantum_dims(sys_in.factors)))
        dout = int(np.prod(_quantum_dims(sys_out.factors)))
        env = din  # Stinespring environment large enough for any din -> dout
        g = rng.normal(size=(dout * env, din)) + 1.0j * rng.normal(size=(dout * env, din))
        v, _ = np.linalg.qr(g)
        kraus = [v.reshape(dout, env, din)[:, e, :] for e in range(env)]
        return quantum_channel_from_kraus(kraus, sys_in, sys_out)
    # squit: compose a symmetry, a contraction and optionally a measure-prepare
    c = squit_symmetry_channel(int(rng.integers(8)))
    lam = rng.uniform(0.2, 1.0)
    c2 = squit_contraction_channel(lam, rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9))
    m = c2.matrix @ c.matrix
    if rng.uniform() < 0.3:
        mp = squit_measure_prepare_channel(
            int(rng.integers(2)),
            squit_state(rng.uniform(-1, 1), rng.uniform(-1, 1)),
            squit_state(rng.uniform(-1, 1), rng.uniform(-1, 1)),
        )
        m = mp.matrix @ m
    return ChannelMat(sys_in, sys_out, m, deterministic=True)


def random_unitary_channel(system: System, seed) -> tuple[ChannelMat, ChannelMat]:
    """A Haar-random reversible quantum channel and its inverse."""
    rng = _rng(seed)
    hdim = int(np.prod(_quantum_dims(system.factors)))
    g = rng.normal(size=(hdim, hdim)) + 1.0j * rng.normal(size=(hdim, hdim))
    u, _ = np.linalg.qr(g)
    fwd = quantum_channel_from_kraus([u], system, system)
    bwd = quantum_channel_from_kraus([u.conj().T], system, system)
    return fwd, bwd


def random_permutation_channel(system: System, seed) -> tuple[ChannelMat, ChannelMat]:
    """A random classical reversible channel (permutation) and its inverse."""
    rng = _rng(seed)
    perm = rng.permutation(system.dim)
    m = np.zeros((system.dim, system.dim))
    m[perm, np.arange(system.dim)] = 1.0
    return (
        ChannelMat(system, system, m, deterministic=True),
        ChannelMat(system, system, m.T, deterministic=True),
    )


# ---------------------------------------------------------------------------
# Pure decompositions
# ---------------------------------------------------------------------------


def pure_decompositions(rho: StateVec, theory: TheoryModel, budget: int = 8,
                        seed=0) -> list[Ensemble]:
    """Decompositions of a normalized state into sub-normalized pure states.

    Classical states have a unique pure decomposition.  Quantum states get
    the eigendecomposition plus ``budget`` random isometry-mixed ones.  Squit
    states get every corner-supported vertex solution plus interior samples.
    """
    if abs(rho.normalization - 1.0) > 1e-7:
        raise ValueError("pure decompositions are defined for normalized states")
    if state_residual(rho) > 1e-7:
        raise ValueError("input is not a valid state")
    rng = _rng(seed)
    system = rho.system
    kind = theory.obit.kind

    if kind == CLASSICAL:
        members = []
        for i, p in enumerate(rho.coords):
            if p > 1e-14:
                v = np.zeros(system.dim)
                v[i] = p
                members.append(StateVec(system, v))
        return [Ensemble(system, tuple(members))]

    if kind == QUANTUM:
        mat = coords_to_density(rho.coords, system.factors)
        lam, vec = np.linalg.eigh(mat)
        keep = lam > 1e-12
        lam, vec = lam[keep], vec[:, keep]
        order = np.argsort(lam)[::-1]
        lam, vec = lam[order], vec[:, order]
        r = lam.size
        out = []
        eig_members = tuple(
            StateVec(system, lam[i] * density_to_coords(
                np.outer(vec[:, i], vec[:, i].conj()), system.factors))
            for i in range(r)
        )
        out.append(Ensemble(system, eig_members))
        sqrt_vecs = vec * np.sqrt(lam)  # columns sqrt(lam_i) |v_i>
        for _ in range(budget):
            m = int(rng.integers(r, r + 3))
            g = rng.normal(size=(m, m)) + 1.0j * rng.normal(size=(m, m))
            q, _ = np.linalg.qr(g)
            w = q[:, :r]
            kets = sqrt_vecs @ w.T  # kets[:, j] = sum_i w[j, i] sqrt(lam_i) |v_i>
            members = []
            for j in range(m):
                k = kets[:, j]
                wt = float(np.vdot(k, k).real)
                if wt > 1e-14:
                    members.append(StateVec(system, density_to_coords(
                        np.outer(k, k.conj()), system.factors)))
            out.append(Ensemble(system, tuple(members)))
        return out

    # squit: exact vertex solutions over corner subsets, then interior samples
    x, y, _ = rho.coords
    corners = np.array(_SQUIT_CORNERS)
    target = np.array([x, y, 1.0])
    sols: list[np.ndarray] = []

    def add(w4: np.ndarray):
        if np.all(w4 >= -1e-12):
            w4 = np.clip(w4, 0.0, None)
            for s in sols:
                if np.max(np.abs(s - w4)) < 1e-10:
                    return
            sols.append(w4)

    for size in (1, 2, 3):
        for subset in combinations(range(4), size):
            a = np.vstack([corners[list(subset)].T, np.ones(size)])
            w, res, rank, _ = np.linalg.lstsq(a, target, rcond=None)
            if np.max(np.abs(a @ w - target)) < 1e-10:
                w4 = np.zeros(4)
                w4[list(subset)] = w
                add(w4)
    if len(sols) >= 2:
        base = sols[:]
        for _ in range(budget):
            mix = rng.dirichlet(np.ones(len(base)))
            add(np.sum([m * s for m, s in zip(mix, base)], axis=0))
    ensembles = []
    for w4 in sols:
        members = tuple(
            squit_state(cx, cy).scaled(w)
            for (cx, cy), w in zip(_SQUIT_CORNERS, w4)
            if w > 1e-14
        )
        ensembles.append(Ensemble(system, members))
    return ensembles


# ---------------------------------------------------------------------------
# Steering (Assumption: every refinement is steerable from one dilation)
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SteeringCertificate:
    dilation: DilationState
    test: ObservationTest
    residuals: np.ndarray
    marginal_residual: float


def steer(rho: StateVec, ens: Ensemble, theory: TheoryModel) -> SteeringCertificate:
    """Build a dilation and an ancilla test steering every ensemble member.

    Classical systems use a diagonal joint with a read-out ancilla; quantum
    systems use the canonical rank-sized purification with the square-root
    test b_i = (S+ sigma_i S+^dagger)^T, S = sqrt(rho) restricted to its
    support.  The squit is rejected: no steering construction is defined for
    its restricted composites.
    """
    if theory.obit.kind == SQUIT:
        raise UnsupportedCompositionError("steering is not available for the squit")
    total = ens.total
    if np.max(np.abs(total.coords - rho.coords)) > 1e-7:
        raise ValueError("ensemble does not sum to the target state")
    system = rho.system

    if len(ens) == 1:
        anc = System((Factor(CLASSICAL, 1),)) if theory.obit.kind == CLASSICAL \
            else System((Factor(QUANTUM, 1),))
        joint = StateVec(system.compose(anc), np.kron(rho.coords, np.ones(1)))
        dil = DilationState(joint, len(system.factors))
        test = ObservationTest(anc, (unit_effect(anc),))
        res = np.array([_steer_residual(dil, test.effects[0], ens.members[0])])
        marg = float(np.max(np.abs(marginalize(dil).coords - rho.coords)))
        return SteeringCertificate(dil, test, res, marg)

    if theory.obit.kind == CLASSICAL:
        k = len(ens)
        anc = System((Factor(CLASSICAL, k),))
        coords = np.zeros(system.dim * k)
        for i, member in enumerate(ens.members):
            e = np.zeros(k)
            e[i] = 1.0
            coords += np.kron(member.coords, e)
        joint = StateVec(system.compose(anc), coords)
        dil = DilationState(joint, len(system.factors))
        effs = []
        for i in range(k):
            e = np.zeros(k)
            e[i] = 1.0
            effs.append(EffectVec(anc, e))
        test = ObservationTest(anc, tuple(effs))
    else:
        mat = coords_to_density(rho.coords, system.factors)
        lam, vec = np.linalg.eigh(mat)
        keep = lam > 1e-12
        lam, vec = lam[keep], vec[:, keep]
        r = lam.size
        anc = System((Factor(QUANTUM, r),))
        s_map = vec * np.sqrt(lam)          # d x r, maps ancilla basis into support
        s_pinv = (vec / np.sqrt(lam)).conj().T  # r x d pseudo-inverse of s_map
        ket = s_map.reshape(-1)              # |Phi> = sum_j sqrt(lam_j)|v_j>|j>
        joint = qstate_from_density(np.outer(ket, ket.conj()),
                                    system.compose(anc))
        dil = DilationState(joint, len(system.factors))
        effs = []
        for member in ens.members:
            sig = coords_to_density(member.coords, system.factors)
            b = (s_pinv @ sig @ s_pinv.conj().T).T
            effs.append(qeffect_from_operator(b, anc))
        test = ObservationTest(anc, tuple(effs))

    res = np.array([
        _steer_residual(dil, b, member) for b, member in zip(test.effects, ens.members)
    ])
    marg = float(np.max(np.abs(marginalize(dil).coords - rho.coords)))
    return SteeringCertificate(dil, test, res, marg)


def _steer_residual(dil: DilationState, b: EffectVec, member: StateVec) -> float:
    steered = condition_on_ancilla(dil, b)
    return float(np.max(np.abs(steered.coords - member.coords)))


def random_refinement(rho: StateVec, theory: TheoryModel, k: int, seed) -> Ensemble:
    """A random k-member refinement of a normalized state."""
    rng = _rng(seed)
    system = rho.system
    if theory.obit.kind == CLASSICAL:
        # split each pure component by a random k-column stochastic matrix
        split = np.stack([rng.dirichlet(np.ones(k)) for _ in range(system.dim)], axis=1)
        members = tuple(
            StateVec(system, split[i] * rho.coords) for i in range(k)
        )
        return Ensemble(system, members)
    if theory.obit.kind == QUANTUM:
        mat = coords_to_density(rho.coords, system.factors)
        lam, vec = np.linalg.eigh(mat)
        lam = np.clip(lam, 0.0, None)
        sqrt_rho = (vec * np.sqrt(lam)) @ vec.conj().T
        hdim = mat.shape[0]
        raw = []
        for _ in range(k):
            g = rng.normal(size=(hdim, hdim)) + 1.0j * rng.normal(size=(hdim, hdim))
            raw.append(g @ g.conj().T)
        total = np.sum(raw, axis=0)
        w_tot, v_tot = np.linalg.eigh(total)
        inv_sqrt = (v_tot / np.sqrt(np.clip(w_tot, 1e-14, None))) @ v_tot.conj().T
        members = []
        for g in raw:
            m = inv_sqrt @ g @ inv_sqrt  # POVM element of a random k-outcome test
            piece = sqrt_rho @ m @ sqrt_rho
            members.append(StateVec(system, density_to_coords(piece, system.factors)))
        return Ensemble(system, tuple(members))
    # squit: random convex split of a corner decomposition
    decs = pure_decompositions(rho, theory, budget=2, seed=rng)
    base = decs[int(rng.integers(len(decs)))]
    members = []
    for s in base.members:
        w = rng.dirichlet(np.ones(2))
        members.extend([s.scaled(w[0]), s.scaled(w[1])])
    return Ensemble(rho.system, tuple(members))

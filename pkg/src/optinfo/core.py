"""Theory-agnostic algebra of states, effects, channels and observation tests.

All three supported state spaces (classical simplex, quantum, box-world squit)
are represented over one real-vector core.  A system is an ordered list of
atomic factors; the coordinates of a composite object are the Kronecker
product of the factor coordinates, in lexicographic (row-major) order over
the factor indices.  With the conventions used here the probability of an
outcome is always the plain Euclidean pairing ``effect . state``:

* classical factor of size d:   states are sub-stochastic vectors in R^d,
  the unit effect is the all-ones vector;
* quantum factor of Hilbert dimension d:  states are coordinates of the
  density operator in an orthonormal Hermitian basis whose first element is
  I/sqrt(d), so the unit effect is (sqrt(d), 0, ..., 0);
* squit factor: coordinates (x, y, n), normalized states have n = 1 and
  |x|, |y| <= 1, the unit effect is (0, 0, 1).

Cone membership and effect validity are delegated to the theory layer; this
module only knows linear structure, composition and coarse-graining.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TOL_SUM = 1e-9  # residual tolerance for sum-to-unit / normalization checks


class DimensionMismatchError(ValueError):
    """Raised when systems or coordinate lengths do not line up."""


class UnsupportedCompositionError(ValueError):
    """Raised for composites the box-world model does not define."""


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------

CLASSICAL = "classical"
QUANTUM = "quantum"
SQUIT = "squit"


@dataclass(frozen=True)
class Factor:
    """One atomic system: a classical d-level, a quantum d-level or a squit."""

    kind: str
    size: int = 0  # simplex points / Hilbert dimension; unused for squit

    @property
    def dim(self) -> int:
        """Linear dimension of the factor's real state space."""
        if self.kind == CLASSICAL:
            return self.size
        if self.kind == QUANTUM:
            return self.size * self.size
        if self.kind == SQUIT:
            return 3
        raise ValueError(f"unknown factor kind {self.kind!r}")

    def unit_coords(self) -> np.ndarray:
        if self.kind == CLASSICAL:
            return np.ones(self.size)
        if self.kind == QUANTUM:
            u = np.zeros(self.size * self.size)
            u[0] = np.sqrt(self.size)
            return u
        return np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class System:
    """An ordered composite of atomic factors (possibly empty = trivial)."""

    factors: tuple[Factor, ...] = ()

    @property
    def dim(self) -> int:
        d = 1
        for f in self.factors:
            d *= f.dim
        return d

    @property
    def theory_id(self) -> str:
        kinds = {f.kind for f in self.factors}
        if SQUIT in kinds:
            return "boxworld"
        if QUANTUM in kinds:
            return QUANTUM
        return CLASSICAL

    @property
    def is_trivial(self) -> bool:
        return not self.factors

    def unit_coords(self) -> np.ndarray:
        u = np.ones(1)
        for f in self.factors:
            u = np.kron(u, f.unit_coords())
        return u

    def compose(self, other: "System") -> "System":
        check_composable(self, other)
        return System(self.factors + other.factors)

    def split(self, n_front: int) -> tuple["System", "System"]:
        return System(self.factors[:n_front]), System(self.factors[n_front:])


TRIVIAL_SYSTEM = System(())


def check_composable(a: System, b: System) -> None:
    """Box-world supports composition with classical factors only."""
    kinds = [f.kind for f in a.factors + b.factors]
    n_squit = kinds.count(SQUIT)
    if n_squit >= 2:
        raise UnsupportedCompositionError("squit x squit composites are not defined")
    if n_squit == 1 and QUANTUM in kinds:
        raise UnsupportedCompositionError("squit x quantum composites are not defined")


def classical_system(d: int, copies: int = 1) -> System:
    return System(tuple(Factor(CLASSICAL, d) for _ in range(copies)))


def quantum_system(d: int, copies: int = 1) -> System:
    return System(tuple(Factor(QUANTUM, d) for _ in range(copies)))


def squit_system() -> System:
    return System((Factor(SQUIT),))


# ---------------------------------------------------------------------------
# States, effects, channels, tests
# ---------------------------------------------------------------------------


def _vec(coords: Iterable[float], dim: int, what: str) -> np.ndarray:
    v = np.asarray(coords, dtype=float)
    if v.shape != (dim,):
        raise DimensionMismatchError(f"{what}: expected {dim} coordinates, got {v.shape}")
    return v


@dataclass(frozen=True, eq=False)
class StateVec:
    """A (possibly sub-normalized) state, as real coordinates on its system."""

    system: System
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _vec(self.coords, self.system.dim, "state"))

    @property
    def normalization(self) -> float:
        return float(self.system.unit_coords() @ self.coords)

    def scaled(self, w: float) -> "StateVec":
        return StateVec(self.system, w * self.coords)


@dataclass(frozen=True, eq=False)
class EffectVec:
    """An effect, as real coordinates dual to the states of its system."""

    system: System
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _vec(self.coords, self.system.dim, "effect"))


@dataclass(frozen=True, eq=False)
class ChannelMat:
    """A transformation, stored as a real matrix acting on state coordinates."""

    in_system: System
    out_system: System
    matrix: np.ndarray
    deterministic: bool = True

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (self.out_system.dim, self.in_system.dim):
            raise DimensionMismatchError(
                f"channel matrix shape {m.shape} does not match systems "
                f"({self.out_system.dim} x {self.in_system.dim})"
            )
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True, eq=False)
class ObservationTest:
    """An ordered collection of effects that should sum to the unit effect."""

    system: System
    effects: tuple[EffectVec, ...]

    def __post_init__(self):
        for a in self.effects:
            if a.system != self.system:
                raise DimensionMismatchError("test effects must share one system")

    def __len__(self) -> int:
        return len(self.effects)

    def sum_coords(self) -> np.ndarray:
        return np.sum([a.coords for a in self.effects], axis=0)


@dataclass(frozen=True, eq=False)
class Ensemble:
    """A refinement: sub-normalized states summing to a target state."""

    system: System
    members: tuple[StateVec, ...]

    def __post_init__(self):
        for s in self.members:
            if s.system != self.system:
                raise DimensionMismatchError("ensemble members must share one system")

    def __len__(self) -> int:
        return len(self.members)

    @property
    def total(self) -> StateVec:
        return StateVec(self.system, np.sum([s.coords for s in self.members], axis=0))

    def weights(self) -> np.ndarray:
        return np.array([s.normalization for s in self.members])


@dataclass(frozen=True, eq=False)
class DilationState:
    """A bipartite state on (front | ancilla) whose front marginal is declared."""

    joint: StateVec
    n_front: int  # number of leading factors forming the marginal system

    @property
    def marginal_system(self) -> System:
        return self.joint.system.split(self.n_front)[0]

    @property
    def ancilla_system(self) -> System:
        return self.joint.system.split(self.n_front)[1]


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def pair(a: EffectVec, s: StateVec) -> float:
    """Probability of observing effect ``a`` on state ``s``."""
    if a.system != s.system:
        raise DimensionMismatchError("pairing requires matching systems")
    return float(a.coords @ s.coords)


def apply_channel(c: ChannelMat, s: StateVec) -> StateVec:
    if c.in_system != s.system:
        raise DimensionMismatchError("channel input system does not match state")
    return StateVec(c.out_system, c.matrix @ s.coords)


def pullback_effect(c: ChannelMat, a: EffectVec) -> EffectVec:
    """The effect a∘C on the channel's input system."""
    if c.out_system != a.system:
        raise DimensionMismatchError("channel output system does not match effect")
    return EffectVec(c.in_system, c.matrix.T @ a.coords)


def identity_channel(system: System) -> ChannelMat:
    return ChannelMat(system, system, np.eye(system.dim), deterministic=True)


def compose_seq(first: ChannelMat, second: ChannelMat) -> ChannelMat:
    """The channel 'first then second'."""
    if first.out_system != second.in_system:
        raise DimensionMismatchError("sequential composition needs matching systems")
    return ChannelMat(
        first.in_system,
        second.out_system,
        second.matrix @ first.matrix,
        deterministic=first.deterministic and second.deterministic,
    )


def compose_par(x, y):
    """Parallel composition of two states, effects or channels of one kind."""
    if isinstance(x, StateVec) and isinstance(y, StateVec):
        sys_ab = x.system.compose(y.system)
        return StateVec(sys_ab, np.kron(x.coords, y.coords))
    if isinstance(x, EffectVec) and isinstance(y, EffectVec):
        sys_ab = x.system.compose(y.system)
        return EffectVec(sys_ab, np.kron(x.coords, y.coords))
    if isinstance(x, ChannelMat) and isinstance(y, ChannelMat):
        sys_in = x.in_system.compose(y.in_system)
        sys_out = x.out_system.compose(y.out_system)
        return ChannelMat(
            sys_in,
            sys_out,
            np.kron(x.matrix, y.matrix),
            deterministic=x.deterministic and y.deterministic,
        )
    raise TypeError("compose_par requires two objects of the same kind")


def unit_effect(system: System) -> EffectVec:
    return EffectVec(system, system.unit_coords())


def marginalize(d: DilationState) -> StateVec:
    """Apply the unit effect on the ancilla block of a dilation."""
    sys_a, sys_b = d.joint.system.split(d.n_front)
    block = d.joint.coords.reshape(sys_a.dim, sys_b.dim)
    return StateVec(sys_a, block @ sys_b.unit_coords())


def condition_on_ancilla(d: DilationState, b: EffectVec) -> StateVec:
    """Apply an ancilla effect to a dilation, returning the steered front state."""
    sys_a, sys_b = d.joint.system.split(d.n_front)
    if b.system != sys_b:
        raise DimensionMismatchError("ancilla effect system does not match dilation")
    block = d.joint.coords.reshape(sys_a.dim, sys_b.dim)
    return StateVec(sys_a, block @ b.coords)


def coarse_grain(t: ObservationTest, partition: Sequence[Sequence[int]]) -> ObservationTest:
    """Merge test outcomes along a disjoint cover of the outcome indices."""
    seen: set[int] = set()
    for block in partition:
        for i in block:
            if i in seen:
                raise ValueError(f"overlapping index {i} in partition")
            seen.add(i)
    if seen != set(range(len(t.effects))):
        raise ValueError("partition must cover all outcome indices exactly once")
    merged = tuple(
        EffectVec(t.system, np.sum([t.effects[i].coords for i in block], axis=0))
        for block in partition
    )
    return ObservationTest(t.system, merged)


@dataclass(frozen=True)
class TestReport:
    """Validity report for an observation test."""

    valid: bool
    effect_residuals: tuple[float, ...]
    sum_residual: float


def validate_test(t: ObservationTest, theory, tol: float = TOL_SUM) -> TestReport:
    """Check effect validity and sum-to-unit for a test.

    ``theory`` must provide ``effect_residual(effect) -> float`` (how far the
    effect is from the valid set; 0 means valid).
    """
    residuals = tuple(float(theory.effect_residual(a)) for a in t.effects)
    sum_residual = float(np.max(np.abs(t.sum_coords() - t.system.unit_coords())))
    valid = sum_residual <= tol and all(r <= tol for r in residuals)
    return TestReport(valid=valid, effect_residuals=residuals, sum_residual=sum_residual)


def combined_effect(effects: Sequence[EffectVec], test: ObservationTest) -> EffectVec:
    """The effect sum_i A_i (x) c_i for effects {A_i} and an ancilla test {c_i}.

    Causality makes this a valid effect on the composite system; validity can
    be verified with ``validate_test``'s underlying residual oracle.
    """
    if len(effects) != len(test.effects):
        raise DimensionMismatchError("need one effect per test outcome")
    sys_ab = effects[0].system.compose(test.system)
    coords = np.sum(
        [np.kron(a.coords, c.coords) for a, c in zip(effects, test.effects)], axis=0
    )
    return EffectVec(sys_ab, coords)


# ---------------------------------------------------------------------------
# Serialization (JSON-friendly dicts; consumed by the CLI)
# ---------------------------------------------------------------------------


def system_to_dict(system: System) -> dict:
    return {
        "factors": [[f.kind, f.size] for f in system.factors],
        "dim": system.dim,
        "theory_id": system.theory_id,
    }


def system_from_dict(d: dict) -> System:
    return System(tuple(Factor(kind, int(size)) for kind, size in d["factors"]))


def state_to_dict(s: StateVec) -> dict:
    return {"system": system_to_dict(s.system), "coords": s.coords.tolist()}


def state_from_dict(d: dict) -> StateVec:
    return StateVec(system_from_dict(d["system"]), np.array(d["coords"], dtype=float))


def channel_to_dict(c: ChannelMat) -> dict:
    return {
        "in_system": system_to_dict(c.in_system),
        "out_system": system_to_dict(c.out_system),
        "matrix": c.matrix.tolist(),
        "deterministic": c.deterministic,
    }


def channel_from_dict(d: dict) -> ChannelMat:
    return ChannelMat(
        system_from_dict(d["in_system"]),
        system_from_dict(d["out_system"]),
        np.array(d["matrix"], dtype=float),
        deterministic=bool(d["deterministic"]),
    )

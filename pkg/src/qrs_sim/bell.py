"""Two-particle spin-correlation experiment built on the relative-state
calculus.

The scenario: a spin-1/2 pair prepared as ``a |up,down> - b |down,up>``
flies apart; each side is measured along an axis in the x-z plane tilted by
``theta_i`` from z, by a three-level pointer device (ready slot 0, outcome
slots 1 and 2).  The module produces the outcome-correlation tables through
three routes -- the amplitude-interference closed form, the product/no-
interference closed form, and a direct evaluation through the generic
joint-probability machinery on the evolved composite state -- plus the
ancilla extension in which extra devices record which basis state each
particle+device pair is in, and a CHSH evaluator.

Outcome sign convention for correlators: outcome 1 maps to +1, outcome 2
to -1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NotNormalized
from .linalg import (
    Operator,
    SpaceRegistry,
    StateVector,
    basis_state,
    embed_operator,
    partial_trace,
    tensor_product,
)
from .reference import JointDistribution, ReferenceSystem, joint_distribution

ROOT_HALF = 1.0 / math.sqrt(2.0)

P1, M1, P2, M2, A1, A2 = "P1", "M1", "P2", "M2", "A1", "A2"
SPIN_DIM = 2
POINTER_DIM = 3
READY = 0

#: spin basis index assigned to each particle's candidate l = 1, 2:
#: particle 1 uses (up, down), particle 2 uses (down, up)
PAIR_BASIS = {1: (0, 1), 2: (1, 0)}

COEFF_TOL = 1e-12
TABLE_SUM_TOL = 1e-10
ENTRY_TOL = 1e-12

TABLE_KINDS = ("entangled", "factorized", "direct", "empirical")


def particle_space(label: str) -> SpaceRegistry:
    return SpaceRegistry([(label, SPIN_DIM)])


def pointer_space(label: str) -> SpaceRegistry:
    return SpaceRegistry([(label, POINTER_DIM)])


@dataclass(frozen=True)
class ExperimentConfig:
    """Pair coefficients and measurement axes.

    The pair state is ``c_1 |up,down> + c_2 |down,up>`` with ``c_1 = a`` and
    ``c_2 = -b``; ``|a|^2 + |b|^2`` must be 1 within 1e-12.  ``theta1`` and
    ``theta2`` are the measurement-axis angles from z, in radians, axes in
    the x-z plane.  ``ancilla`` records whether the scenario attaches
    recording devices (bookkeeping; the ancilla entry points work either
    way).  Defaults give the maximally entangled pair at (0, pi/2).
    """

    a: complex = ROOT_HALF
    b: complex = ROOT_HALF
    theta1: float = 0.0
    theta2: float = math.pi / 2
    ancilla: bool = False

    def __post_init__(self):
        total = abs(self.a) ** 2 + abs(self.b) ** 2
        if abs(total - 1.0) > COEFF_TOL:
            raise NotNormalized(f"|a|^2 + |b|^2 = {total!r} deviates from 1 by more than {COEFF_TOL}")

    @property
    def coefficients(self) -> tuple[complex, complex]:
        """(c_1, c_2) = (a, -b)."""
        return (complex(self.a), -complex(self.b))

    def theta(self, which: int) -> float:
        return self.theta1 if _side(which) == 1 else self.theta2


@dataclass(frozen=True)
class CorrelationTable:
    """2x2 outcome-probability table for one pair of axis settings."""

    settings: tuple[float, float]
    table: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in TABLE_KINDS:
            raise ValueError(f"kind must be one of {TABLE_KINDS}, got {self.kind!r}")
        table = np.asarray(self.table, dtype=float)
        if table.shape != (2, 2):
            raise ValueError(f"table shape {table.shape} must be (2, 2)")
        if float(table.min()) < -ENTRY_TOL:
            raise ValueError(f"negative entry {float(table.min()):.3e}")
        if abs(float(table.sum()) - 1.0) > TABLE_SUM_TOL:
            raise ValueError(f"table sums to {float(table.sum())!r}")
        table = table.copy()
        table.flags.writeable = False
        object.__setattr__(self, "table", table)


def _side(which: int) -> int:
    if which not in (1, 2):
        raise ValueError(f"side must be 1 or 2, got {which!r}")
    return which


def particle_label(which: int) -> str:
    return P1 if _side(which) == 1 else P2


def pointer_label(which: int) -> str:
    return M1 if _side(which) == 1 else M2


def ancilla_label(which: int) -> str:
    return A1 if _side(which) == 1 else A2


def entangled_pair_state(config: ExperimentConfig) -> StateVector:
    """The two-particle state sum_l c_l |phi_{1,l}> |phi_{2,l}> on (P1, P2)."""
    space = SpaceRegistry([(P1, SPIN_DIM), (P2, SPIN_DIM)])
    amps = np.zeros(space.dim, dtype=complex)
    for l, c in enumerate(config.coefficients, start=1):
        s1 = PAIR_BASIS[1][l - 1]
        s2 = PAIR_BASIS[2][l - 1]
        amps[s1 * SPIN_DIM + s2] = c
    return StateVector(space, amps)


def spin_eigenstates(theta: float, label: str = "P") -> tuple[StateVector, StateVector]:
    """Eigenstates of the spin along the axis tilted by ``theta`` from z in
    the x-z plane, with real amplitudes:

        xi_1 =  cos(theta/2) |up> + sin(theta/2) |down>
        xi_2 = -sin(theta/2) |up> + cos(theta/2) |down>
    """
    space = particle_space(label)
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return StateVector(space, [c, s]), StateVector(space, [-s, c])


def outcome_overlaps(theta: float, which: int) -> np.ndarray:
    """Real 2x2 matrix O with O[j-1, l-1] = <xi_j(theta) | phi_{which,l}>."""
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    xi = np.array([[c, s], [-s, c]])
    columns = PAIR_BASIS[_side(which)]
    return xi[:, list(columns)]


def measurement_unitary(theta: float, particle: str, pointer: str) -> Operator:
    """Unitary on particle + pointer implementing the measurement coupling
    |xi_j>|ready> -> |xi_j>|outcome_j>, completed by the controlled pointer
    swap ready <-> outcome_j conditioned on xi_j (identity on the remaining
    pointer state)."""
    space = SpaceRegistry([(particle, SPIN_DIM), (pointer, POINTER_DIM)])
    xi = spin_eigenstates(theta, particle)
    total = np.zeros((space.dim, space.dim), dtype=complex)
    for j, state in enumerate(xi, start=1):
        swap = np.eye(POINTER_DIM)
        swap[[READY, j]] = swap[[j, READY]]
        block = np.outer(state.amplitudes, state.amplitudes.conj())
        total += np.kron(block, swap)
    return Operator(space, total)


def experiment_space(ancilla: bool = False) -> SpaceRegistry:
    entries = [(P1, SPIN_DIM), (M1, POINTER_DIM), (P2, SPIN_DIM), (M2, POINTER_DIM)]
    if ancilla:
        entries += [(A1, POINTER_DIM), (A2, POINTER_DIM)]
    return SpaceRegistry(entries)


@lru_cache(maxsize=256)
def _embedded_measurement(theta: float, which: int) -> Operator:
    # angle grids revisit the same settings constantly; Operator is
    # immutable, so sharing cached instances is safe
    space = experiment_space()
    side = _side(which)
    return embed_operator(
        measurement_unitary(theta, particle_label(side), pointer_label(side)), space
    )


def evolve_experiment(config: ExperimentConfig) -> StateVector:
    """Final state on (P1, M1, P2, M2): both local measurement unitaries
    applied to the pair state with both pointers ready."""
    space = experiment_space()
    start = tensor_product(
        entangled_pair_state(config),
        basis_state(pointer_space(M1), READY),
        basis_state(pointer_space(M2), READY),
    ).reorder(space.labels)
    u1 = _embedded_measurement(config.theta1, 1)
    u2 = _embedded_measurement(config.theta2, 2)
    return u2.apply(u1.apply(start))


def device_marginal(final_state: StateVector, which: int) -> np.ndarray:
    """Outcome distribution of one device: diagonal of its reduced state on
    the outcome pointer slots."""
    rho = partial_trace(final_state, pointer_label(which))
    return np.array([rho.matrix[1, 1].real, rho.matrix[2, 2].real])


def correlation_entangled(config: ExperimentConfig) -> CorrelationTable:
    """Interference closed form:
    P(j, k) = |sum_l c_l <xi1_j|phi_{1,l}> <xi2_k|phi_{2,l}>|^2."""
    o1 = outcome_overlaps(config.theta1, 1)
    o2 = outcome_overlaps(config.theta2, 2)
    amp = o1 @ np.diag(config.coefficients) @ o2.T
    return CorrelationTable((config.theta1, config.theta2), np.abs(amp) ** 2, "entangled")


def correlation_factorized(config: ExperimentConfig) -> CorrelationTable:
    """No-interference closed form:
    P(j, k) = sum_l |c_l|^2 |<xi1_j|phi_{1,l}>|^2 |<xi2_k|phi_{2,l}>|^2."""
    o1 = outcome_overlaps(config.theta1, 1) ** 2
    o2 = outcome_overlaps(config.theta2, 2) ** 2
    weights = np.abs(np.array(config.coefficients)) ** 2
    return CorrelationTable((config.theta1, config.theta2), o1 @ np.diag(weights) @ o2.T, "factorized")


def pointer_outcome_states(label: str) -> tuple[StateVector, StateVector]:
    """The two outcome pointer basis states, in outcome order.

    These are the analytic internal-state candidates of a device after the
    measurement; they are injected into the joint-probability machinery so
    the table stays indexed by outcome even when the device's reduced state
    is degenerate and an eigendecomposition could not pin the basis.
    """
    space = pointer_space(label)
    return basis_state(space, 1), basis_state(space, 2)


def particle_candidate_states(which: int) -> tuple[StateVector, StateVector]:
    """The analytic pair-basis states phi_{which,1}, phi_{which,2}."""
    space = particle_space(particle_label(which))
    i1, i2 = PAIR_BASIS[_side(which)]
    return basis_state(space, i1), basis_state(space, i2)


def correlation_direct(config: ExperimentConfig) -> CorrelationTable:
    """Device-device table computed through the generic machinery: evolve
    the composite, reduce to the two devices, and take projector-product
    traces against the analytic outcome candidates."""
    final = evolve_experiment(config)
    reference = ReferenceSystem(final, isolated=True)
    dist = joint_distribution(
        [(M1,), (M2,)],
        reference,
        candidates=[pointer_outcome_states(M1), pointer_outcome_states(M2)],
    )
    return CorrelationTable((config.theta1, config.theta2), dist.probabilities, "direct")


def pair_distribution(config: ExperimentConfig) -> JointDistribution:
    """Joint candidate table of the bare pair over ({P1}, {P2}), evaluated
    through the generic machinery with the analytic pair basis injected;
    equals diag(|c_1|^2, |c_2|^2)."""
    reference = ReferenceSystem(entangled_pair_state(config), isolated=True)
    return joint_distribution(
        [(P1,), (P2,)],
        reference,
        candidates=[particle_candidate_states(1), particle_candidate_states(2)],
    )


def intuitive_joint(config: ExperimentConfig) -> np.ndarray:
    """The would-be joint table over (l1, l2, j, k):
    |c_{l1}|^2 delta_{l1,l2} |<xi1_j|phi_{1,l1}>|^2 |<xi2_k|phi_{2,l2}>|^2.

    Its (j, k) marginal is the factorized table; the (l1, l2) marginal is
    diag(|c_1|^2, |c_2|^2).
    """
    o1 = outcome_overlaps(config.theta1, 1) ** 2
    o2 = outcome_overlaps(config.theta2, 2) ** 2
    weights = np.abs(np.array(config.coefficients)) ** 2
    table = np.zeros((2, 2, 2, 2))
    for l in range(2):
        table[l, l] = weights[l] * np.outer(o1[:, l], o2[:, l])
    return table


def ancilla_candidate_states(config: ExperimentConfig, which: int) -> tuple[StateVector, StateVector]:
    """The analytic internal-state candidates chi_l of particle + device
    after the measurement:

        chi_l = sum_j <xi_j|phi_l> |xi_j>|outcome_j>

    Orthonormal for any setting; constructed directly because the reduced
    state is degenerate whenever |c_1| = |c_2| and an eigendecomposition
    could return any basis of the degenerate subspace.
    """
    side = _side(which)
    space = SpaceRegistry([(particle_label(side), SPIN_DIM), (pointer_label(side), POINTER_DIM)])
    overlaps = outcome_overlaps(config.theta(side), side)
    xi = spin_eigenstates(config.theta(side), particle_label(side))
    out = []
    for l in range(2):
        amps = np.zeros(space.dim, dtype=complex)
        for j, state in enumerate(xi, start=1):
            pointer = np.zeros(POINTER_DIM)
            pointer[j] = 1.0
            amps += overlaps[j - 1, l] * np.kron(state.amplitudes, pointer)
        out.append(StateVector(space, amps))
    return tuple(out)


def ancilla_recording_unitary(config: ExperimentConfig, which: int) -> Operator:
    """Unitary on particle + device + ancilla pointer that records which
    chi_l the particle+device pair is in: |chi_l>|ready> -> |chi_l>|slot_l>,
    completed by the controlled ready <-> slot_l pointer swap and the
    identity on the orthogonal complement of the chi states.  It leaves the
    chi states themselves untouched."""
    side = _side(which)
    chi = ancilla_candidate_states(config, side)
    device_dim = SPIN_DIM * POINTER_DIM
    space = SpaceRegistry(
        [
            (particle_label(side), SPIN_DIM),
            (pointer_label(side), POINTER_DIM),
            (ancilla_label(side), POINTER_DIM),
        ]
    )
    total = np.zeros((space.dim, space.dim), dtype=complex)
    covered = np.zeros((device_dim, device_dim), dtype=complex)
    for l, state in enumerate(chi, start=1):
        swap = np.eye(POINTER_DIM)
        swap[[READY, l]] = swap[[l, READY]]
        block = np.outer(state.amplitudes, state.amplitudes.conj())
        covered += block
        total += np.kron(block, swap)
    total += np.kron(np.eye(device_dim) - covered, np.eye(POINTER_DIM))
    return Operator(space, total)


def ancilla_experiment(config: ExperimentConfig) -> StateVector:
    """Final state on (P1, M1, P2, M2, A1, A2) after both measurements and
    both ancilla recordings."""
    space = experiment_space(ancilla=True)
    start = tensor_product(
        evolve_experiment(config),
        basis_state(pointer_space(A1), READY),
        basis_state(pointer_space(A2), READY),
    )
    w1 = embed_operator(ancilla_recording_unitary(config, 1), space)
    w2 = embed_operator(ancilla_recording_unitary(config, 2), space)
    return w2.apply(w1.apply(start))


def ancilla_joint_distribution(config: ExperimentConfig) -> JointDistribution:
    """Four-system table over (A1, A2, M1, M2) on the ancilla-extended
    state, with the analytic pointer candidates injected; indexed
    (l1, l2, j, k) and equal to the intuitive would-be joint table."""
    reference = ReferenceSystem(ancilla_experiment(config), isolated=True)
    return joint_distribution(
        [(A1,), (A2,), (M1,), (M2,)],
        reference,
        candidates=[
            pointer_outcome_states(A1),
            pointer_outcome_states(A2),
            pointer_outcome_states(M1),
            pointer_outcome_states(M2),
        ],
    )


def ancilla_device_table(config: ExperimentConfig) -> CorrelationTable:
    """Device-device table on the ancilla-extended state: the recordings
    change it from the interference form to the factorized form."""
    reference = ReferenceSystem(ancilla_experiment(config), isolated=True)
    dist = joint_distribution(
        [(M1,), (M2,)],
        reference,
        candidates=[pointer_outcome_states(M1), pointer_outcome_states(M2)],
    )
    return CorrelationTable((config.theta1, config.theta2), dist.probabilities, "direct")


def correlator(table: CorrelationTable) -> float:
    """E = sum_{jk} (-1)^{j+k} P(j, k) with outcomes valued +1, -1."""
    p = table.table
    return float(p[0, 0] - p[0, 1] - p[1, 0] + p[1, 1])


_TABLE_ROUTES = {
    "entangled": correlation_entangled,
    "factorized": correlation_factorized,
    "direct": correlation_direct,
}


def chsh(
    kind: str,
    angles: tuple[float, float, float, float],
    a: complex = ROOT_HALF,
    b: complex = ROOT_HALF,
) -> float:
    """CHSH combination S = E(alpha, beta) - E(alpha, beta') +
    E(alpha', beta) + E(alpha', beta') for the chosen correlation route."""
    if kind not in _TABLE_ROUTES:
        raise ValueError(f"kind must be one of {sorted(_TABLE_ROUTES)}, got {kind!r}")
    route = _TABLE_ROUTES[kind]
    alpha, alpha_p, beta, beta_p = (float(x) for x in angles)

    def e(theta1: float, theta2: float) -> float:
        return correlator(route(ExperimentConfig(a=a, b=b, theta1=theta1, theta2=theta2)))

    return e(alpha, beta) - e(alpha, beta_p) + e(alpha_p, beta) + e(alpha_p, beta_p)

# -*- coding: utf-8 -*-
"""Exact simulation of small pure-state qubit registers.

States are dense complex amplitude vectors over the ``2**n`` computational
basis states. Qubit ``0`` is the least-significant bit of the basis-state
integer, so amplitude ``k`` belongs to the basis state whose qubit ``q`` reads
``(k >> q) & 1``. Global phase is never tracked.

The private kernels :func:`_rotate` and :func:`_cnot` accept amplitude blocks of
shape ``(2**n,)`` or ``(2**n, B)``; the second form evolves ``B`` states at
once and is what the circuit layer uses for minibatches.

"""

import math
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np
from typing_extensions import Literal, final

from .errors import ArgumentError, CapacityError, QubitIndexError
from .utils import Seed, make_generator

__all__ = ['MAX_QUBITS', 'GateKind', 'QuantumState', 'GateOp', 'GateProgram', 'ShotCounts',
           'zero_state', 'apply_gate', 'run_program', 'probabilities', 'expectation_z',
           'sample_counts', 'init_amplitudes_direct', 'mottonen_prepare', 'fidelity',
           'rotation_matrix', 'basis_state', 'marginal_probabilities', 'evolve_block', 'expectation_z_block']

#: Largest register the simulator accepts.
MAX_QUBITS = 24

GateKind = Literal['RX', 'RY', 'RZ', 'CNOT']

ROTATIONS = ('RX', 'RY', 'RZ')

# amplitude norms are accepted when within this distance of one
_NORM_TOLERANCE = 1e-8

###############################################################################
# Typings


@final
class QuantumState:
    """Pure state of a qubit register.

    Args:
        num_qubits (int): register width
        amplitudes (numpy.ndarray): complex vector of length ``2**num_qubits``

    """

    __slots__ = ('num_qubits', 'amplitudes')

    def __init__(self, num_qubits: int, amplitudes: np.ndarray) -> None:
        _check_width(num_qubits)
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if amplitudes.shape != (1 << num_qubits,):
            raise ArgumentError('expected %d amplitudes for %d qubits, got shape %r'
                                % (1 << num_qubits, num_qubits, amplitudes.shape))
        #: int: Register width.
        self.num_qubits = num_qubits
        #: numpy.ndarray: Complex amplitudes, basis state order.
        self.amplitudes = amplitudes

    @property
    def dimension(self) -> int:
        return 1 << self.num_qubits

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def __repr__(self) -> str:
        return 'QuantumState(num_qubits=%d, amplitudes=%r)' % (self.num_qubits, self.amplitudes)


class GateOp:
    """A single gate instruction.

    Args:
        kind (GateKind): ``RX``, ``RY``, ``RZ`` or ``CNOT``
        target (int): target qubit

    Keyword Args:
        control (Optional[int]): control qubit, ``CNOT`` only
        angle (Optional[float]): rotation angle in radians, rotations only

    """

    __slots__ = ('kind', 'target', 'control', 'angle')

    def __init__(self, kind: GateKind, target: int, *, control: Optional[int] = None,
                 angle: Optional[float] = None) -> None:
        if kind in ROTATIONS:
            if angle is None:
                raise ArgumentError('%s gate requires an angle' % kind)
            if control is not None:
                raise ArgumentError('%s gate takes no control qubit' % kind)
            angle = float(angle)
            if not math.isfinite(angle):
                raise ArgumentError('rotation angle must be finite, got %r' % angle)
        elif kind == 'CNOT':
            if angle is not None:
                raise ArgumentError('CNOT gate takes no angle')
            if control is None:
                raise ArgumentError('CNOT gate requires a control qubit')
            if control == target:
                raise ArgumentError('CNOT control and target must differ (both %d)' % target)
        else:
            raise ArgumentError('unknown gate kind %r' % (kind,))
        if target < 0 or (control is not None and control < 0):
            raise QubitIndexError('qubit indices must be non-negative')

        self.kind = kind  # type: GateKind
        self.target = int(target)
        self.control = None if control is None else int(control)  # type: Optional[int]
        self.angle = angle  # type: Optional[float]

    @property
    def max_index(self) -> int:
        if self.control is None:
            return self.target
        return max(self.target, self.control)

    def dump(self) -> str:
        """Render the op as ``KIND target [control] [angle]``."""
        fields = [self.kind, str(self.target)]
        if self.control is not None:
            fields.append(str(self.control))
        if self.angle is not None:
            fields.append('%.12g' % self.angle)
        return ' '.join(fields)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GateOp):
            return NotImplemented
        return (self.kind, self.target, self.control, self.angle) == \
            (other.kind, other.target, other.control, other.angle)

    def __repr__(self) -> str:
        return 'GateOp(%s)' % self.dump()


class GateProgram:
    """Ordered gate list for a fixed register width.

    Args:
        num_qubits (int): declared register width
        ops (Iterable[GateOp]): gates, applied first to last

    """

    def __init__(self, num_qubits: int, ops: Iterable[GateOp] = ()) -> None:
        _check_width(num_qubits)
        #: int: Declared register width.
        self.num_qubits = num_qubits
        #: List[GateOp]: Gate sequence.
        self.ops = []  # type: List[GateOp]
        for op in ops:
            self.append(op)

    def append(self, op: GateOp) -> None:
        if op.max_index >= self.num_qubits:
            raise QubitIndexError('gate %s does not fit a %d-qubit program' % (op.dump(), self.num_qubits))
        self.ops.append(op)

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self) -> Iterator[GateOp]:
        return iter(self.ops)

    def count(self, kind: GateKind) -> int:
        return sum(1 for op in self.ops if op.kind == kind)

    def dump(self) -> str:
        """Plain-text debug listing, one op per line."""
        return ''.join(op.dump() + '\n' for op in self.ops)


class ShotCounts:
    """Measurement histogram.

    Args:
        num_qubits (int): register width, the bit length of every key
        counts (Dict[str, int]): bitstring to occurrences; bitstrings are
            written most-significant qubit first, so qubit ``0`` is the last
            character

    """

    def __init__(self, num_qubits: int, counts: Dict[str, int]) -> None:
        self.num_qubits = num_qubits
        self.counts = dict(counts)
        #: int: Total number of shots.
        self.shots = sum(self.counts.values())

    def marginal_one(self, qubit: int) -> int:
        """Number of shots that measured ``qubit`` as ``1``."""
        position = self.num_qubits - 1 - qubit
        return sum(count for bits, count in self.counts.items() if bits[position] == '1')

    def expectation_z(self, qubit: int) -> float:
        """Sampled estimate of ``<Z_qubit>``."""
        _check_index(qubit, self.num_qubits)
        ones = self.marginal_one(qubit)
        return (self.shots - 2 * ones) / self.shots

    def __getitem__(self, bits: str) -> int:
        return self.counts.get(bits, 0)

    def __repr__(self) -> str:
        return 'ShotCounts(shots=%d, counts=%r)' % (self.shots, self.counts)


###############################################################################
# Auxiliaries


def _check_width(num_qubits: int) -> None:
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise CapacityError('register width must lie in [1, %d], got %d' % (MAX_QUBITS, num_qubits))


def _check_index(qubit: int, num_qubits: int) -> None:
    if not 0 <= qubit < num_qubits:
        raise QubitIndexError('qubit %d does not exist on a %d-qubit register' % (qubit, num_qubits))


def _width_of(length: int) -> int:
    if length < 2 or length & (length - 1):
        raise ArgumentError('amplitude vector length must be a power of two >= 2, got %d' % length)
    return length.bit_length() - 1


def rotation_matrix(kind: GateKind, angle: float) -> np.ndarray:
    """The 2x2 unitary of ``R_kind(angle) = exp(-i angle sigma / 2)``."""
    cos = math.cos(angle / 2)
    sin = math.sin(angle / 2)
    if kind == 'RX':
        return np.array([[cos, -1j * sin], [-1j * sin, cos]], dtype=complex)
    if kind == 'RY':
        return np.array([[cos, -sin], [sin, cos]], dtype=complex)
    if kind == 'RZ':
        return np.array([[cos - 1j * sin, 0], [0, cos + 1j * sin]], dtype=complex)
    raise ArgumentError('not a rotation kind: %r' % (kind,))


def _rotate(amplitudes: np.ndarray, matrix: np.ndarray, qubit: int) -> np.ndarray:
    """Apply a single-qubit unitary to every state column of ``amplitudes``."""
    batch = amplitudes.shape[1:]
    view = amplitudes.reshape((amplitudes.shape[0] >> (qubit + 1), 2, 1 << qubit) + batch)
    return np.einsum('ab,ibj...->iaj...', matrix, view).reshape(amplitudes.shape)


def _cnot(amplitudes: np.ndarray, control: int, target: int) -> np.ndarray:
    """Permute amplitudes as CNOT does; exact, no arithmetic involved."""
    index = np.arange(amplitudes.shape[0])
    source = index ^ (((index >> control) & 1) << target)
    return amplitudes[source]


def _apply_op(amplitudes: np.ndarray, op: GateOp) -> np.ndarray:
    if op.kind == 'CNOT':
        return _cnot(amplitudes, op.control, op.target)  # type: ignore[arg-type]
    return _rotate(amplitudes, rotation_matrix(op.kind, op.angle), op.target)  # type: ignore[arg-type]


def _z_signs(num_qubits: int, qubits: Iterable[int]) -> np.ndarray:
    """Matrix of ``+1``/``-1`` eigenvalues of ``Z_q`` per basis state and qubit."""
    index = np.arange(1 << num_qubits)[:, np.newaxis]
    bits = (index >> np.asarray(list(qubits), dtype=int)[np.newaxis, :]) & 1
    return 1.0 - 2.0 * bits


###############################################################################
# Public Interface


def zero_state(num_qubits: int) -> QuantumState:
    """The register initialised in ``|0...0>``.

    Raises:
        CapacityError: if ``num_qubits`` lies outside ``[1, MAX_QUBITS]``

    >>> zero_state(2).amplitudes
    array([1.+0.j, 0.+0.j, 0.+0.j, 0.+0.j])

    """
    _check_width(num_qubits)
    amplitudes = np.zeros(1 << num_qubits, dtype=complex)
    amplitudes[0] = 1.0
    return QuantumState(num_qubits, amplitudes)


def apply_gate(state: QuantumState, op: GateOp) -> QuantumState:
    """Return ``state`` evolved by ``op``; the input is left untouched.

    Raises:
        QubitIndexError: if ``op`` addresses a qubit the state does not have

    """
    _check_index(op.target, state.num_qubits)
    if op.control is not None:
        _check_index(op.control, state.num_qubits)
    return QuantumState(state.num_qubits, _apply_op(state.amplitudes, op))


def run_program(program: GateProgram, state: Optional[QuantumState] = None) -> QuantumState:
    """Execute ``program`` on ``state`` (``|0...0>`` when omitted)."""
    if state is None:
        state = zero_state(program.num_qubits)
    if state.num_qubits != program.num_qubits:
        raise ArgumentError('program declares %d qubits but the state has %d'
                            % (program.num_qubits, state.num_qubits))
    amplitudes = state.amplitudes
    for op in program:
        amplitudes = _apply_op(amplitudes, op)
    return QuantumState(state.num_qubits, amplitudes)


def probabilities(state: QuantumState) -> np.ndarray:
    """Squared amplitude magnitudes."""
    return np.abs(state.amplitudes) ** 2


def expectation_z(state: QuantumState, qubit: int) -> float:
    """``<Z_qubit> = P(0) - P(1)`` computed from the amplitudes.

    Raises:
        QubitIndexError: if ``qubit`` is not on the register

    """
    _check_index(qubit, state.num_qubits)
    signs = _z_signs(state.num_qubits, [qubit])[:, 0]
    value = float(np.dot(probabilities(state), signs))
    return min(1.0, max(-1.0, value))


def sample_counts(state: QuantumState, shots: int, seed: Seed) -> ShotCounts:
    """Draw ``shots`` i.i.d. computational-basis measurements.

    Args:
        state (QuantumState): state to measure
        shots (int): number of repetitions
        seed (Seed): stream seed, the result is a pure function of it

    Raises:
        ArgumentError: if ``shots < 1``

    """
    if shots < 1:
        raise ArgumentError('shots must be at least 1, got %d' % shots)
    weights = probabilities(state)
    weights = weights / weights.sum()
    draws = make_generator(seed).multinomial(shots, weights)
    counts = {}  # type: Dict[str, int]
    for index in np.flatnonzero(draws):
        counts[format(int(index), '0%db' % state.num_qubits)] = int(draws[index])
    return ShotCounts(state.num_qubits, counts)


def init_amplitudes_direct(target: object) -> QuantumState:
    """Load ``target`` verbatim as the register state.

    This is the simulator shortcut for amplitude encoding; no gates are
    synthesised.

    Raises:
        ArgumentError: if the length is not a power of two or the norm is not one

    """
    amplitudes = np.array(target, dtype=complex)
    if amplitudes.ndim != 1:
        raise ArgumentError('amplitudes must be one-dimensional')
    num_qubits = _width_of(amplitudes.shape[0])
    norm = np.linalg.norm(amplitudes)
    if not abs(norm - 1.0) <= _NORM_TOLERANCE:
        raise ArgumentError('amplitude vector must have unit norm, got %.12g' % norm)
    return QuantumState(num_qubits, amplitudes)


def _split_angles(target: np.ndarray, num_qubits: int, level: int) -> np.ndarray:
    """RY angles that split every block of ``level`` fixed top bits in two."""
    qubit = num_qubits - 1 - level
    blocks = target.reshape(1 << level, 2, 1 << qubit)
    if qubit == 0:
        # leaf level keeps the sign of each amplitude pair
        low, high = blocks[:, 0, 0], blocks[:, 1, 0]
    else:
        low = np.sqrt(np.sum(blocks[:, 0, :] ** 2, axis=1))
        high = np.sqrt(np.sum(blocks[:, 1, :] ** 2, axis=1))
    return 2.0 * np.arctan2(high, low)


def _gray(index: int) -> int:
    return index ^ (index >> 1)


def _uniform_ry(program: GateProgram, alphas: np.ndarray, target: int, controls: List[int]) -> None:
    """Append a uniformly controlled RY decomposed into RY and CNOT gates.

    Control pattern ``j`` (bit ``p`` of ``j`` is qubit ``controls[p]``) must
    see the rotation ``alphas[j]``. The decomposition interleaves ``2**k``
    rotations with CNOTs walking the Gray code, which turns the angle map into
    a Walsh transform: ``theta = M alpha`` with
    ``M[i, j] = (-1)**popcount(j & gray(i)) / 2**k``.
    """
    size = len(alphas)
    if size == 1:
        program.append(GateOp('RY', target, angle=float(alphas[0])))
        return
    rows = np.arange(size)
    overlap = (rows ^ (rows >> 1))[:, np.newaxis] & rows[np.newaxis, :]
    parity = np.zeros_like(overlap)
    while np.any(overlap):
        parity ^= overlap & 1
        overlap >>= 1
    thetas = (1.0 - 2.0 * parity) @ alphas / size
    for row in range(size):
        program.append(GateOp('RY', target, angle=float(thetas[row])))
        flipped = _gray(row) ^ _gray((row + 1) % size)
        program.append(GateOp('CNOT', target, control=controls[flipped.bit_length() - 1]))


def mottonen_prepare(target: object) -> GateProgram:
    """Synthesise a gate program preparing a real amplitude vector.

    The program acts on ``|0...0>``: qubit ``n-1`` is rotated first, then each
    lower qubit under a uniformly controlled RY conditioned on all higher
    qubits. Only RY and CNOT gates are emitted, and the amplitude signs are
    carried by the signed angles of the last stage, so the prepared state
    matches ``target`` up to global phase with ``O(2**n)`` gates.

    Args:
        target: real unit vector of power-of-two length

    Returns:
        GateProgram: the preparation circuit

    Raises:
        ArgumentError: if ``target`` is complex, not normalised, or of invalid length

    """
    vector = np.asarray(target)
    if np.iscomplexobj(vector):
        if np.any(np.abs(vector.imag) > _NORM_TOLERANCE):
            raise ArgumentError('gate synthesis supports real amplitude vectors only')
        vector = vector.real
    vector = np.asarray(vector, dtype=float)
    if vector.ndim != 1 or not np.all(np.isfinite(vector)):
        raise ArgumentError('target must be a finite one-dimensional vector')
    num_qubits = _width_of(vector.shape[0])
    _check_width(num_qubits)
    norm = np.linalg.norm(vector)
    if not abs(norm - 1.0) <= _NORM_TOLERANCE:
        raise ArgumentError('target must have unit norm, got %.12g' % norm)

    program = GateProgram(num_qubits)
    for level in range(num_qubits):
        qubit = num_qubits - 1 - level
        controls = list(range(qubit + 1, num_qubits))
        _uniform_ry(program, _split_angles(vector, num_qubits, level), qubit, controls)
    return program


def fidelity(first: QuantumState, second: QuantumState) -> float:
    """Phase-insensitive overlap ``|<first|second>|**2``."""
    if first.num_qubits != second.num_qubits:
        raise ArgumentError('states have different widths (%d vs %d)' % (first.num_qubits, second.num_qubits))
    return float(abs(np.vdot(first.amplitudes, second.amplitudes)) ** 2)


def basis_state(num_qubits: int, index: int) -> QuantumState:
    """Computational basis state ``|index>``."""
    _check_width(num_qubits)
    if not 0 <= index < 1 << num_qubits:
        raise QubitIndexError('basis index %d out of range for %d qubits' % (index, num_qubits))
    amplitudes = np.zeros(1 << num_qubits, dtype=complex)
    amplitudes[index] = 1.0
    return QuantumState(num_qubits, amplitudes)


def marginal_probabilities(state: QuantumState, qubit: int) -> Tuple[float, float]:
    """``(P(qubit = 0), P(qubit = 1))``."""
    _check_index(qubit, state.num_qubits)
    weights = probabilities(state)
    ones = float(weights[(np.arange(state.dimension) >> qubit) & 1 == 1].sum())
    return float(weights.sum()) - ones, ones


def evolve_block(program: GateProgram, block: np.ndarray) -> np.ndarray:
    """Execute ``program`` on every column of a ``(2**n, B)`` amplitude block.

    Columns are not validated for unit norm; callers hand in encoded states.

    """
    block = np.asarray(block, dtype=complex)
    if block.ndim != 2 or block.shape[0] != 1 << program.num_qubits:
        raise ArgumentError('expected a (%d, B) amplitude block, got shape %r'
                            % (1 << program.num_qubits, block.shape))
    for op in program:
        block = _apply_op(block, op)
    return block


def expectation_z_block(block: np.ndarray, qubits: Iterable[int]) -> np.ndarray:
    """``<Z_q>`` of every column of ``block`` for each qubit in ``qubits``.

    Returns:
        numpy.ndarray: real array of shape ``(B, len(qubits))``

    """
    qubits = list(qubits)
    num_qubits = _width_of(block.shape[0])
    for qubit in qubits:
        _check_index(qubit, num_qubits)
    weights = np.abs(block) ** 2
    return np.clip(weights.T @ _z_signs(num_qubits, qubits), -1.0, 1.0)

"""Exact quantum backends for the Clifford fragment.

:class:`StabilizerState` keeps ``n`` signed Pauli generators (no
destabilizers) packed into Python ints, one bit per qubit.  A Pauli is
stored as ``(x, z)`` bitmasks where ``x=z=1`` on a qubit stands for ``Y``
itself (not ``XZ``).  :class:`DenseState` is a plain state-vector mirror used
only to cross-check the tableau.

Qubits are addressed by integer labels (the protocol's qubit indices), not
positions; new labels are allocated in ``|0>`` on first use.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np

from .model import Basis, Sign

PROBABILITIES = (0.0, 0.5, 1.0)

_PAULI_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


class QuantumError(ValueError):
    pass


def _product_phase(x1: int, z1: int, x2: int, z2: int) -> int:
    """Exponent of ``i`` picked up by the product ``P1 * P2`` (mod 4)."""
    ox1, oy1, oz1 = x1 & ~z1, x1 & z1, z1 & ~x1
    ox2, oy2, oz2 = x2 & ~z2, x2 & z2, z2 & ~x2
    plus = (ox1 & oy2) | (oy1 & oz2) | (oz1 & ox2)
    minus = (ox1 & oz2) | (oy1 & ox2) | (oz1 & oy2)
    return (plus.bit_count() - minus.bit_count()) % 4


def _anticommute(x1: int, z1: int, x2: int, z2: int) -> bool:
    return bool(((x1 & z2) ^ (z1 & x2)).bit_count() & 1)


PauliSpec = Union[str, Mapping[int, str]]


@dataclass(frozen=True)
class ProjectionResult:
    probability: float
    state: Optional["StabilizerState"]

    def __post_init__(self) -> None:
        if (self.probability == 0) != (self.state is None):
            raise QuantumError("post-state must be absent exactly when probability is 0")


class StabilizerState:
    """Pure stabilizer state over labelled qubits.

    Rows are ``[x, z, s]`` with ``s`` in {0, 1} for the sign ``(-1)**s``.
    Mutating methods work in place and return ``self``; use :meth:`copy`
    for branching.
    """

    __slots__ = ("rows", "pos")

    def __init__(self, labels=()):
        self.pos: dict[int, int] = {}
        self.rows: list[list[int]] = []
        for label in labels:
            self.add_qubit(label)

    @property
    def n(self) -> int:
        return len(self.pos)

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(sorted(self.pos, key=self.pos.__getitem__))

    def copy(self) -> "StabilizerState":
        out = StabilizerState.__new__(StabilizerState)
        out.pos = dict(self.pos)
        out.rows = [row[:] for row in self.rows]
        return out

    def add_qubit(self, label: int) -> int:
        if label in self.pos:
            raise QuantumError(f"qubit {label} already exists")
        p = len(self.pos)
        self.pos[label] = p
        self.rows.append([0, 1 << p, 0])
        return p

    def _bit(self, label: int) -> int:
        if label not in self.pos:
            self.add_qubit(label)
        return 1 << self.pos[label]

    # -- Clifford conjugations -------------------------------------------

    def h(self, label: int) -> "StabilizerState":
        b = self._bit(label)
        for row in self.rows:
            x, z = bool(row[0] & b), bool(row[1] & b)
            if x and z:
                row[2] ^= 1
            elif x or z:
                row[0] ^= b
                row[1] ^= b
        return self

    def s(self, label: int) -> "StabilizerState":
        b = self._bit(label)
        for row in self.rows:
            if row[0] & b:
                if row[1] & b:
                    row[2] ^= 1
                row[1] ^= b
        return self

    def x(self, label: int) -> "StabilizerState":
        b = self._bit(label)
        for row in self.rows:
            if row[1] & b:
                row[2] ^= 1
        return self

    def z(self, label: int) -> "StabilizerState":
        b = self._bit(label)
        for row in self.rows:
            if row[0] & b:
                row[2] ^= 1
        return self

    def cz(self, a: int, c: int) -> "StabilizerState":
        if a == c:
            raise QuantumError("controlled-Z needs two distinct qubits")
        ba, bc = self._bit(a), self._bit(c)
        for row in self.rows:
            xa, xc = bool(row[0] & ba), bool(row[0] & bc)
            if xa and xc and (bool(row[1] & ba) != bool(row[1] & bc)):
                row[2] ^= 1
            if xc:
                row[1] ^= ba
            if xa:
                row[1] ^= bc
        return self

    # -- Pauli queries -----------------------------------------------------

    def pauli(self, spec: PauliSpec) -> tuple[int, int]:
        """Pack a Pauli string into ``(x, z)`` masks.

        ``spec`` is either a mapping ``label -> 'X'|'Y'|'Z'|'I'`` or a string
        read in :attr:`labels` order.
        """
        if isinstance(spec, str):
            labels = self.labels
            if len(spec) != len(labels):
                raise QuantumError(f"Pauli string length {len(spec)} != {len(labels)} qubits")
            spec = dict(zip(labels, spec))
        x = z = 0
        for label, letter in spec.items():
            try:
                px, pz = _PAULI_BITS[letter.upper()]
            except KeyError:
                raise QuantumError(f"unknown Pauli letter {letter!r}") from None
            b = self._bit(label)
            x |= b if px else 0
            z |= b if pz else 0
        return x, z

    def _group_sign(self, x: int, z: int) -> Optional[int]:
        """Sign bit of ``±P`` in the stabilizer group, None if P is not in it."""
        n = len(self.rows)
        shift = n
        basis: list[tuple[int, int]] = []  # (vector, combination mask)
        for k, row in enumerate(self.rows):
            v = row[0] | (row[1] << shift)
            combo = 1 << k
            for bv, bc in basis:
                if v ^ bv < v:
                    v ^= bv
                    combo ^= bc
            if v:
                basis.append((v, combo))
                basis.sort(reverse=True)
        target = x | (z << shift)
        combo = 0
        for bv, bc in basis:
            if target ^ bv < target:
                target ^= bv
                combo ^= bc
        if target:
            return None
        ax = az = phase = 0
        for k, row in enumerate(self.rows):
            if combo >> k & 1:
                phase = (phase + 2 * row[2] + _product_phase(ax, az, row[0], row[1])) % 4
                ax ^= row[0]
                az ^= row[1]
        if phase % 2:
            raise QuantumError("non-Hermitian product of stabilizer generators")
        return phase // 2

    def expectation(self, spec: PauliSpec) -> int:
        return self.expectation_xz(*self.pauli(spec))

    def expectation_xz(self, x: int, z: int) -> int:
        for row in self.rows:
            if _anticommute(row[0], row[1], x, z):
                return 0
        sign = self._group_sign(x, z)
        if sign is None:
            raise QuantumError("commuting Pauli outside a full stabilizer group")
        return 1 - 2 * sign

    def project_pauli(self, x: int, z: int, sign: int) -> float:
        """Project in place onto the ``(-1)**sign`` eigenspace of ``(x, z)``.

        Returns the outcome probability; at probability 0 the state is left
        untouched and must be discarded by the caller.
        """
        k = None
        for i, row in enumerate(self.rows):
            if _anticommute(row[0], row[1], x, z):
                if k is None:
                    k = i
                else:
                    pk = self.rows[k]
                    row[2] = (row[2] + pk[2] + _product_phase(row[0], row[1], pk[0], pk[1]) // 2) % 2
                    row[0] ^= pk[0]
                    row[1] ^= pk[1]
        if k is not None:
            self.rows[k] = [x, z, sign]
            return 0.5
        current = self._group_sign(x, z)
        if current is None:
            raise QuantumError("commuting Pauli outside a full stabilizer group")
        return 1.0 if current == sign else 0.0

    def single(self, label: int, basis: Basis) -> tuple[int, int]:
        b = self._bit(label)
        px, pz = _PAULI_BITS[basis.value]
        return (b if px else 0, b if pz else 0)

    def project(self, label: int, basis: Basis, sign: Sign) -> ProjectionResult:
        """Functional signed single-qubit projection (the state is not modified)."""
        out = self.copy()
        x, z = out.single(label, basis)
        p = out.project_pauli(x, z, sign.bit)
        return ProjectionResult(p, out if p else None)

    def reset(self, label: int, basis: Basis = Basis.X, sign: Sign = Sign.PLUS) -> "StabilizerState":
        """Re-prepare ``label`` in a Pauli eigenstate, in place.

        The qubit is first forced to ``|0>`` (taking the ``+`` branch of a Z
        measurement when it is possible, flipping otherwise), then rotated.
        """
        b = self._bit(label)
        if self.project_pauli(0, b, 0) == 0.0:
            self.project_pauli(0, b, 1)
            self.x(label)
        self._isolate(b)
        if basis is Basis.X:
            self.h(label)
        elif basis is Basis.Y:
            self.h(label).s(label)
        if sign is Sign.MINUS:
            if basis is Basis.Z:
                self.x(label)
            else:
                self.z(label)
        return self

    def _isolate(self, b: int) -> None:
        """Make ``+Z_b`` (known to be in the group) a generator by itself."""
        target = None
        for i, row in enumerate(self.rows):
            if row[0] == 0 and row[1] == b:
                target = i
                break
        if target is None:
            # Z_b = product of some generators; swap one of them for Z_b
            n = len(self.rows)
            basis: list[tuple[int, int]] = []
            for k, row in enumerate(self.rows):
                v = row[0] | (row[1] << n)
                combo = 1 << k
                for bv, bc in basis:
                    if v ^ bv < v:
                        v ^= bv
                        combo ^= bc
                if v:
                    basis.append((v, combo))
                    basis.sort(reverse=True)
            t = b << n
            combo = 0
            for bv, bc in basis:
                if t ^ bv < t:
                    t ^= bv
                    combo ^= bc
            target = (combo & -combo).bit_length() - 1
            self.rows[target] = [0, b, 0]
        for i, row in enumerate(self.rows):
            if i != target and row[1] & b:
                row[1] ^= b
        self.rows[target][2] = 0

    def generators(self) -> list[str]:
        """Human-readable generators in label order, e.g. ``'+XZ'``."""
        labels = self.labels
        out = []
        for x, z, s in self.rows:
            letters = []
            for label in labels:
                b = 1 << self.pos[label]
                letters.append("IZXY"[(2 if x & b else 0) + (1 if z & b else 0)])
            out.append(("-" if s else "+") + "".join(letters))
        return out

    def canonical(self) -> tuple:
        """Basis-independent fingerprint of the stabilizer group (RREF)."""
        n = len(self.rows)
        rows = [r[:] for r in self.rows]
        out = []
        for col in reversed(range(2 * n)):
            def bit(r):
                v = r[0] | (r[1] << n)
                return v >> col & 1
            pivot = next((r for r in rows if bit(r)), None)
            if pivot is None:
                continue
            rows.remove(pivot)
            for r in rows:
                if bit(r):
                    r[2] = (r[2] + pivot[2] + _product_phase(r[0], r[1], pivot[0], pivot[1]) // 2) % 2
                    r[0] ^= pivot[0]
                    r[1] ^= pivot[1]
            for r in out:
                if bit(r):
                    r[2] = (r[2] + pivot[2] + _product_phase(r[0], r[1], pivot[0], pivot[1]) // 2) % 2
                    r[0] ^= pivot[0]
                    r[1] ^= pivot[1]
            out.append(pivot)
        return tuple(self.labels), tuple(tuple(r) for r in out)


def vacuum(labels) -> StabilizerState:
    return StabilizerState(labels)


def prep_plus(state: StabilizerState, qubit: int) -> StabilizerState:
    return state.copy().reset(qubit, Basis.X, Sign.PLUS)


def entangle(state: StabilizerState, i: int, j: int) -> StabilizerState:
    return state.copy().cz(i, j)


def project(state: StabilizerState, qubit: int, basis: Basis, sign: Sign) -> ProjectionResult:
    return state.project(qubit, basis, sign)


def measure_expectation(state: StabilizerState, pauli: PauliSpec) -> int:
    """+1/-1 when ``pauli`` is ± a stabilizer, 0 when its outcome is random."""
    return state.expectation(pauli)


def graph_state(vertices, edges) -> StabilizerState:
    st = StabilizerState(vertices)
    for v in vertices:
        st.reset(v)
    for a, b in edges:
        st.cz(a, b)
    return st


# ---------------------------------------------------------------------------
# Dense oracle

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.array([[1, 0], [0, 1j]], dtype=complex)
_PAULI = {Basis.X: _X, Basis.Y: _Y, Basis.Z: _Z}


class DenseState:
    """State vector over labelled qubits; axis ``k`` of ``psi`` is ``labels[k]``."""

    def __init__(self, labels=()):
        self.labels: list[int] = []
        self.psi = np.ones((), dtype=complex)
        for label in labels:
            self.add_qubit(label)

    def copy(self) -> "DenseState":
        out = DenseState()
        out.labels = list(self.labels)
        out.psi = self.psi.copy()
        return out

    @property
    def n(self) -> int:
        return len(self.labels)

    def vector(self) -> np.ndarray:
        return self.psi.reshape(-1)

    def add_qubit(self, label: int) -> None:
        if label in self.labels:
            raise QuantumError(f"qubit {label} already exists")
        self.labels.append(label)
        self.psi = np.multiply.outer(self.psi, np.array([1, 0], dtype=complex))

    def _axis(self, label: int) -> int:
        if label not in self.labels:
            self.add_qubit(label)
        return self.labels.index(label)

    def apply1(self, label: int, u: np.ndarray) -> "DenseState":
        ax = self._axis(label)
        self.psi = np.moveaxis(np.tensordot(u, self.psi, axes=([1], [ax])), 0, ax)
        return self

    def h(self, label):
        return self.apply1(label, _H)

    def s(self, label):
        return self.apply1(label, _S)

    def x(self, label):
        return self.apply1(label, _X)

    def z(self, label):
        return self.apply1(label, _Z)

    def cz(self, a: int, c: int) -> "DenseState":
        if a == c:
            raise QuantumError("controlled-Z needs two distinct qubits")
        ia, ic = self._axis(a), self._axis(c)
        idx = [slice(None)] * self.n
        idx[ia] = 1
        idx[ic] = 1
        self.psi[tuple(idx)] *= -1
        return self

    def project_op(self, label: int, op: np.ndarray) -> float:
        """Apply the projector ``op`` to ``label``; renormalize when possible."""
        self.apply1(label, op)
        p = float(np.vdot(self.psi, self.psi).real)
        if p > 1e-12:
            self.psi /= np.sqrt(p)
        return p

    def project(self, label: int, basis: Basis, sign: Sign) -> float:
        s = 1 if sign is Sign.PLUS else -1
        return self.project_op(label, (_I2 + s * _PAULI[basis]) / 2)

    def project_string(self, spec: Mapping[int, str], sign: int) -> float:
        op = self._operator(spec)
        proj = (np.eye(op.shape[0]) + (1 - 2 * sign) * op) / 2
        vec = proj @ self.vector()
        p = float(np.vdot(vec, vec).real)
        if p > 1e-12:
            self.psi = (vec / np.sqrt(p)).reshape(self.psi.shape)
        return p

    def _operator(self, spec: Mapping[int, str]) -> np.ndarray:
        for label in spec:
            self._axis(label)
        op = np.ones((1, 1), dtype=complex)
        letters = {"I": _I2, "X": _X, "Y": _Y, "Z": _Z}
        for label in self.labels:
            op = np.kron(op, letters[spec.get(label, "I").upper()])
        return op

    def expectation(self, spec: Mapping[int, str]) -> float:
        v = self.vector()
        return float(np.vdot(v, self._operator(spec) @ v).real)

    def reset(self, label: int, basis: Basis = Basis.X, sign: Sign = Sign.PLUS) -> "DenseState":
        keep = self.copy()
        if self.project(label, Basis.Z, Sign.PLUS) <= 1e-12:
            self.psi = keep.psi
            self.project(label, Basis.Z, Sign.MINUS)
            self.x(label)
        if basis is Basis.X:
            self.h(label)
        elif basis is Basis.Y:
            self.h(label).s(label)
        if sign is Sign.MINUS:
            if basis is Basis.Z:
                self.x(label)
            else:
                self.z(label)
        return self

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector()))


def dense_project(state: DenseState, qubit: int, basis: Basis, sign: Sign) -> tuple[float, DenseState]:
    out = state.copy()
    p = out.project(qubit, basis, sign)
    return p, out


# ---------------------------------------------------------------------------
# Random Clifford circuits for cross-checking the two backends
#
# A circuit is a list of text ops: ``prep q B s``, ``h q``, ``s q``,
# ``cz a b``, ``project q B s`` and ``pauli P s`` where ``P`` is a Pauli
# string over all qubits.  A probability-0 projection is followed by the
# opposite outcome so that the run can continue.

def random_circuit(rng, n_qubits: int, length: int) -> list[str]:
    ops = [f"prep {q} {rng.choice('XYZ')} {rng.choice('+-')}" for q in range(n_qubits)]
    for _ in range(length):
        kind = rng.choice(("h", "s", "cz", "cz", "project", "project", "pauli"))
        q = rng.randrange(n_qubits)
        if kind == "cz" and n_qubits > 1:
            a, b = rng.sample(range(n_qubits), 2)
            ops.append(f"cz {a} {b}")
        elif kind in ("h", "s"):
            ops.append(f"{kind} {q}")
        elif kind == "pauli":
            word = "".join(rng.choice("IXYZ") for _ in range(n_qubits))
            if set(word) == {"I"}:
                word = "Z" + word[1:]
            ops.append(f"pauli {word} {rng.choice('+-')}")
        else:
            ops.append(f"project {q} {rng.choice('XYZ')} {rng.choice('+-')}")
    return ops


def run_circuit(ops: list[str]) -> list[tuple[float, float]]:
    """(tableau, dense) probability of every projection in the circuit."""
    st = StabilizerState()
    dn = DenseState()
    out: list[tuple[float, float]] = []
    for op in ops:
        parts = op.split()
        kind = parts[0]
        if kind == "prep":
            q, basis, sign = int(parts[1]), Basis(parts[2]), Sign(parts[3])
            if q not in st.pos:
                st.add_qubit(q)
                dn.add_qubit(q)
            st.reset(q, basis, sign)
            dn.reset(q, basis, sign)
        elif kind in ("h", "s"):
            q = int(parts[1])
            getattr(st, kind)(q)
            getattr(dn, kind)(q)
        elif kind == "cz":
            a, b = int(parts[1]), int(parts[2])
            st.cz(a, b)
            dn.cz(a, b)
        elif kind in ("project", "pauli"):
            if kind == "project":
                spec = {int(parts[1]): parts[2]}
                sign = 0 if parts[3] == "+" else 1
            else:
                spec = {q: c for q, c in zip(st.labels, parts[1]) if c != "I"}
                sign = 0 if parts[2] == "+" else 1
            x, z = st.pauli(spec)
            keep = dn.copy()
            pt = st.project_pauli(x, z, sign)
            pd = dn.project_string(spec, sign)
            out.append((pt, pd))
            if pt == 0.0:
                dn = keep
                st.project_pauli(x, z, 1 - sign)
                dn.project_string(spec, 1 - sign)
        else:
            raise QuantumError(f"unknown circuit op {op!r}")
    return out


def agree(pt: float, pd: float, tol: float = 1e-9) -> bool:
    return pt in PROBABILITIES and abs(pt - pd) <= tol

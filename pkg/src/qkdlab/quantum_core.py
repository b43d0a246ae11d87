"""Dense linear algebra for small quantum systems.

Density operators, pure states, classical-quantum (cq) states, POVM
measurement, and the distance / information measures built on top of
them.  Everything is dense complex128 numpy; the intended regime is a
handful of qubits, capped by :data:`DEFAULT_DIM_CAP`.  All containers
are immutable after construction, so values can be shared freely.

Conventions:

* Classical key labels are bit strings such as ``"0110"``.  The abort
  symbol is the reserved label :data:`PERP`, which is never a valid bit
  string and is carried explicitly alongside the key labels.
* Logarithms in information quantities are base 2; ``0 * log 0 == 0``.
* Tolerances are module constants and are deliberately asymmetric:
  state vectors are held to 1e-12, operator-level checks to 1e-9.
"""

from __future__ import annotations

import math
from dataclasses import InitVar, dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "PERP",
    "DEFAULT_DIM_CAP",
    "DensityOperator",
    "PureState",
    "CqState",
    "Povm",
    "JointDistribution",
    "make_pure",
    "to_density",
    "bb84_encode",
    "tensor",
    "tensor_pure",
    "product_pure",
    "trace_distance",
    "cq_trace_distance",
    "measure",
    "cq_measure",
    "mutual_information",
    "total_variation",
    "qubit_basis",
    "bb84_basis_povm",
    "product_qubit_povm",
    "standard_basis_povm",
]

PERP = "PERP"

HERM_TOL = 1e-9
EIG_TOL = 1e-9
TRACE_TOL = 1e-9
PURE_NORM_TOL = 1e-12
PROB_SUM_TOL = 1e-12
POVM_SUM_TOL = 1e-9
DEFAULT_DIM_CAP = 2**14


def _as_square_complex(matrix) -> np.ndarray:
    m = np.array(matrix, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, positive semidefinite, unit-trace complex matrix.

    Construction validates all three properties.  Hermiticity is checked
    elementwise to 1e-9 and the matrix is then exactly symmetrised.
    Eigenvalues above ``-1e-9`` are accepted: genuine but tiny negative
    dips are clipped to zero and the operator renormalised, while harder
    violations raise ``ValueError``.  The stored matrix is read-only.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = _as_square_complex(self.matrix)
        herm_dev = float(np.abs(m - m.conj().T).max())
        if herm_dev > HERM_TOL:
            raise ValueError(f"matrix is not Hermitian (deviation {herm_dev:.3e})")
        m = (m + m.conj().T) / 2
        evals = np.linalg.eigvalsh(m)
        if evals[0] < -EIG_TOL:
            raise ValueError(f"matrix is not PSD (min eigenvalue {evals[0]:.3e})")
        if evals[0] < 0.0:
            w, v = np.linalg.eigh(m)
            w = np.clip(w, 0.0, None)
            m = (v * w) @ v.conj().T
        tr = float(m.trace().real)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace {tr!r} is not 1 within {TRACE_TOL}")
        if tr != 1.0:
            m = m / tr
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def to_json_dict(self) -> dict:
        return {
            "type": "density_operator",
            "dim": self.dim,
            "matrix": _complex_matrix_to_json(self.matrix),
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "DensityOperator":
        _expect_type(data, "density_operator")
        m = _complex_matrix_from_json(data["matrix"])
        if m.shape[0] != int(data["dim"]):
            raise ValueError("'dim' does not match the matrix shape")
        return cls(m)

    @classmethod
    def fully_mixed(cls, dim: int) -> "DensityOperator":
        if dim < 1:
            raise ValueError("dim must be positive")
        return cls(np.eye(dim, dtype=np.complex128) / dim)


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit-norm complex state vector (norm within 1e-12 of 1)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=np.complex128)
        if a.ndim != 1 or a.shape[0] < 1:
            raise ValueError("amplitudes must be a nonempty 1-d vector")
        norm = float(np.linalg.norm(a))
        if abs(norm - 1.0) > PURE_NORM_TOL:
            raise ValueError(f"state norm {norm!r} is not 1 within {PURE_NORM_TOL}")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]


def make_pure(amplitudes) -> PureState:
    """Normalise a nonzero complex vector into a :class:`PureState`."""
    a = np.array(amplitudes, dtype=np.complex128)
    if a.ndim != 1 or a.shape[0] < 1:
        raise ValueError("amplitudes must be a nonempty 1-d vector")
    norm = float(np.linalg.norm(a))
    if norm < 1e-12:
        raise ValueError("cannot normalise a (near-)zero vector")
    return PureState(a / norm)


def to_density(psi: PureState) -> DensityOperator:
    a = psi.amplitudes
    return DensityOperator(np.outer(a, a.conj()))


def bb84_encode(r: int, s: int) -> PureState:
    """BB84 encoding of data bit ``r`` in basis bit ``s``.

    Basis 0 is computational, basis 1 diagonal::

        (r=0, s=0) -> |0>          (r=0, s=1) -> (|0> + |1>)/sqrt(2)
        (r=1, s=0) -> |1>          (r=1, s=1) -> (|0> - |1>)/sqrt(2)
    """
    if r not in (0, 1) or s not in (0, 1):
        raise ValueError("r and s must be bits")
    h = 1.0 / math.sqrt(2.0)
    table = {
        (0, 0): (1.0, 0.0),
        (1, 0): (0.0, 1.0),
        (0, 1): (h, h),
        (1, 1): (h, -h),
    }
    return PureState(np.array(table[(r, s)], dtype=np.complex128))


def tensor(a: DensityOperator, b: DensityOperator, max_dim: int = DEFAULT_DIM_CAP) -> DensityOperator:
    """Kronecker product of two density operators, capped at ``max_dim``."""
    out_dim = a.dim * b.dim
    if out_dim > max_dim:
        raise ValueError(f"tensor dimension {out_dim} exceeds cap {max_dim}")
    return DensityOperator(np.kron(a.matrix, b.matrix))


def tensor_pure(a: PureState, b: PureState, max_dim: int = DEFAULT_DIM_CAP) -> PureState:
    out_dim = a.dim * b.dim
    if out_dim > max_dim:
        raise ValueError(f"tensor dimension {out_dim} exceeds cap {max_dim}")
    return PureState(np.kron(a.amplitudes, b.amplitudes))


def product_pure(states: Sequence[PureState], max_dim: int = DEFAULT_DIM_CAP) -> PureState:
    """Tensor a sequence of pure states left to right."""
    if not states:
        raise ValueError("need at least one factor")
    out = states[0]
    for s in states[1:]:
        out = tensor_pure(out, s, max_dim=max_dim)
    return out


def _valid_label(label: str, key_len: int) -> bool:
    if label == PERP:
        return True
    return len(label) == key_len and all(ch in "01" for ch in label)


def _label_sort_key(label: str):
    # bit strings lexicographically, PERP last
    return (label == PERP, label)


@dataclass(frozen=True, eq=False)
class CqState:
    """Classical-quantum state: a labelled mixture ``{(s, p_s, rho_s)}``.

    ``key_len`` is the classical register width in bits; labels are bit
    strings of that length plus the optional abort label :data:`PERP`.
    Branch probabilities must sum to 1 within 1e-9 and all branch
    operators must share one dimension.  Absent labels mean probability
    zero.  Branches are stored sorted (bit strings first, PERP last) in
    a read-only mapping.
    """

    key_len: int
    branches: Mapping[str, tuple[float, DensityOperator]]

    def __post_init__(self):
        if not isinstance(self.key_len, int) or self.key_len < 0:
            raise ValueError("key_len must be a nonnegative integer")
        if not self.branches:
            raise ValueError("a cq-state needs at least one branch")
        clean: dict[str, tuple[float, DensityOperator]] = {}
        dim = None
        total = 0.0
        for label in sorted(self.branches, key=_label_sort_key):
            p, rho = self.branches[label]
            if not _valid_label(label, self.key_len):
                raise ValueError(f"label {label!r} is not a {self.key_len}-bit string or {PERP}")
            p = float(p)
            if p < -PROB_SUM_TOL or p > 1.0 + PROB_SUM_TOL:
                raise ValueError(f"branch probability {p!r} outside [0, 1]")
            p = min(1.0, max(0.0, p))
            if not isinstance(rho, DensityOperator):
                raise ValueError("branch operators must be DensityOperator instances")
            if dim is None:
                dim = rho.dim
            elif rho.dim != dim:
                raise ValueError("all branch operators must share one dimension")
            total += p
            clean[label] = (p, rho)
        if abs(total - 1.0) > TRACE_TOL:
            raise ValueError(f"branch probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "branches", MappingProxyType(clean))

    @property
    def dim(self) -> int:
        return next(iter(self.branches.values()))[1].dim

    @property
    def p_perp(self) -> float:
        entry = self.branches.get(PERP)
        return entry[0] if entry is not None else 0.0

    def probability(self, label: str) -> float:
        entry = self.branches.get(label)
        return entry[0] if entry is not None else 0.0

    def label_distribution(self) -> dict[str, float]:
        return {label: p for label, (p, _) in self.branches.items()}

    def to_json_dict(self) -> dict:
        return {
            "type": "cq_state",
            "key_len": self.key_len,
            "branches": [
                {"label": label, "prob": p, "rho": rho.to_json_dict()}
                for label, (p, rho) in self.branches.items()
            ],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "CqState":
        _expect_type(data, "cq_state")
        branches = {}
        for entry in data["branches"]:
            label = entry["label"]
            if label in branches:
                raise ValueError(f"duplicate branch label {label!r}")
            branches[label] = (float(entry["prob"]), DensityOperator.from_json_dict(entry["rho"]))
        return cls(key_len=int(data["key_len"]), branches=branches)


@dataclass(frozen=True, eq=False)
class Povm:
    """POVM as an ordered tuple of ``(outcome_label, effect)`` pairs.

    Each effect must be Hermitian and PSD (to the operator tolerances)
    and the effects must sum to the identity elementwise within 1e-9.
    ``_trusted`` skips the per-effect eigenvalue check; it is set only
    by constructors that guarantee positivity, e.g. rank-1 projectors
    onto rows of a verified-orthonormal basis.
    """

    effects: tuple[tuple[str, np.ndarray], ...]
    _trusted: InitVar[bool] = False

    def __post_init__(self, _trusted: bool):
        if not self.effects:
            raise ValueError("a POVM needs at least one effect")
        clean = []
        labels = set()
        dim = None
        total = None
        for label, e in self.effects:
            label = str(label)
            if label in labels:
                raise ValueError(f"duplicate outcome label {label!r}")
            labels.add(label)
            e = _as_square_complex(e)
            if dim is None:
                dim = e.shape[0]
                total = np.zeros((dim, dim), dtype=np.complex128)
            elif e.shape[0] != dim:
                raise ValueError("all effects must share one dimension")
            if not _trusted:
                if float(np.abs(e - e.conj().T).max()) > HERM_TOL:
                    raise ValueError(f"effect {label!r} is not Hermitian")
                emin = float(np.linalg.eigvalsh(e)[0])
                if emin < -EIG_TOL:
                    raise ValueError(f"effect {label!r} is not PSD (min eigenvalue {emin:.3e})")
            total += e
            e.setflags(write=False)
            clean.append((label, e))
        dev = float(np.abs(total - np.eye(dim)).max())
        if dev > POVM_SUM_TOL:
            raise ValueError(f"effects do not sum to identity (deviation {dev:.3e})")
        object.__setattr__(self, "effects", tuple(clean))

    @property
    def dim(self) -> int:
        return self.effects[0][1].shape[0]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.effects)

    def stacked(self) -> np.ndarray:
        return np.stack([e for _, e in self.effects])

    @classmethod
    def from_basis(cls, basis: np.ndarray, labels: Sequence[str] | None = None) -> "Povm":
        """Projective POVM from the rows of an orthonormal basis matrix."""
        v = _as_square_complex(basis)
        dim = v.shape[0]
        dev = float(np.abs(v @ v.conj().T - np.eye(dim)).max())
        if dev > POVM_SUM_TOL:
            raise ValueError(f"rows are not orthonormal (deviation {dev:.3e})")
        if labels is None:
            labels = _default_outcome_labels(dim)
        if len(labels) != dim:
            raise ValueError("need exactly one label per basis vector")
        effects = tuple(
            (str(label), np.outer(v[i], v[i].conj())) for i, label in enumerate(labels)
        )
        return cls(effects, _trusted=True)


def _default_outcome_labels(dim: int) -> list[str]:
    # bit strings when dim is a power of two, decimal strings otherwise
    n = dim.bit_length() - 1
    if dim == 2**n:
        return [format(i, f"0{max(n, 1)}b") if n else "" for i in range(dim)]
    return [str(i) for i in range(dim)]


def qubit_basis(theta: float, phi: float = 0.0) -> np.ndarray:
    """Orthonormal qubit basis rotated by ``theta`` with relative phase ``phi``.

    Row 0 is ``cos(theta)|0> + e^{i phi} sin(theta)|1>``; theta = 0 is
    the computational basis, pi/4 the diagonal basis, pi/8 the Breidbart
    (intermediate) basis.
    """
    c, s = math.cos(theta), math.sin(theta)
    ph = complex(math.cos(phi), math.sin(phi))
    return np.array([[c, ph * s], [-s, ph * c]], dtype=np.complex128)


def bb84_basis_povm(s: int) -> Povm:
    """Projective measurement in BB84 basis ``s`` (0 computational, 1 diagonal)."""
    if s not in (0, 1):
        raise ValueError("s must be a bit")
    return Povm.from_basis(qubit_basis(0.0 if s == 0 else math.pi / 4), labels=["0", "1"])


def product_qubit_povm(thetas: Sequence[float], phis: Sequence[float] | None = None) -> Povm:
    """Product of single-qubit projective measurements, one angle per qubit.

    Outcome labels are bit strings with qubit 0 as the leftmost bit.
    An empty angle list yields the trivial measurement on dimension 1.
    """
    if phis is None:
        phis = [0.0] * len(thetas)
    if len(phis) != len(thetas):
        raise ValueError("need one phase per angle")
    v = np.array([[1.0 + 0.0j]])
    for theta, phi in zip(thetas, phis):
        v = np.kron(v, qubit_basis(theta, phi))
    n = len(thetas)
    labels = [format(i, f"0{n}b") if n else "" for i in range(2**n)]
    return Povm.from_basis(v, labels=labels)


def standard_basis_povm(dim: int) -> Povm:
    return Povm.from_basis(np.eye(dim, dtype=np.complex128))


def trace_distance(a: DensityOperator, b: DensityOperator) -> float:
    """Trace distance ``0.5 * ||a - b||_1`` via eigenvalues of the difference."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    evals = np.linalg.eigvalsh(a.matrix - b.matrix)
    return min(1.0, max(0.0, 0.5 * float(np.abs(evals).sum())))


def cq_trace_distance(a: CqState, b: CqState) -> float:
    """Trace distance between two cq-states over the same key register.

    Exploits block-diagonality: the distance is the sum over labels of
    ``0.5 * || p_s rho_a^s - q_s rho_b^s ||_1``, which equals the trace
    distance of the dense classical-quantum embeddings.  Labels present
    on one side only contribute with the missing side treated as
    probability zero.
    """
    if a.key_len != b.key_len:
        raise ValueError("cq-states have different key lengths")
    if a.dim != b.dim:
        raise ValueError("cq-states have different branch dimensions")
    dim = a.dim
    zero = np.zeros((dim, dim), dtype=np.complex128)
    total = 0.0
    for label in set(a.branches) | set(b.branches):
        ea = a.branches.get(label)
        eb = b.branches.get(label)
        ma = ea[0] * ea[1].matrix if ea is not None else zero
        mb = eb[0] * eb[1].matrix if eb is not None else zero
        evals = np.linalg.eigvalsh(ma - mb)
        total += 0.5 * float(np.abs(evals).sum())
    return min(1.0, max(0.0, total))


def measure(rho: DensityOperator, povm: Povm) -> dict[str, float]:
    """Outcome distribution ``Pr[z] = tr(E_z rho)`` (Born rule).

    The returned probabilities are clipped at zero against rounding
    noise and sum to 1 within the POVM completeness tolerance; they are
    not renormalised.
    """
    if rho.dim != povm.dim:
        raise ValueError(f"dimension mismatch: state {rho.dim}, POVM {povm.dim}")
    probs = np.einsum("kij,ji->k", povm.stacked(), rho.matrix).real
    probs = np.maximum(probs, 0.0)
    return {label: float(p) for label, p in zip(povm.labels, probs)}


def cq_measure(cq: CqState, povm: Povm) -> "JointDistribution":
    """Joint distribution of (key label, measurement outcome).

    Measures every branch with the same POVM: ``P(s, z) = p_s tr(E_z
    rho_s)``.  The table is renormalised by its total (a factor within
    the POVM completeness tolerance of 1) so the result meets the strict
    distribution-sum invariant of :class:`JointDistribution`.
    """
    if cq.dim != povm.dim:
        raise ValueError(f"dimension mismatch: state {cq.dim}, POVM {povm.dim}")
    effects = povm.stacked()
    labels = povm.labels
    table: dict[tuple[str, str], float] = {}
    for s, (p, rho) in cq.branches.items():
        probs = np.maximum(np.einsum("kij,ji->k", effects, rho.matrix).real, 0.0)
        for z, pr in zip(labels, probs):
            table[(s, z)] = p * float(pr)
    total = sum(table.values())
    if not (0.5 < total < 2.0):
        raise ValueError(f"measurement table sums to {total!r}; POVM or state invalid")
    return JointDistribution({k: v / total for k, v in table.items()})


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Finite joint distribution over pairs of classical labels.

    Probabilities must be nonnegative and sum to 1 within 1e-12 (a
    stricter tolerance than the operator-level checks, since these are
    exact classical objects).
    """

    table: Mapping[tuple[str, str], float]

    def __post_init__(self):
        clean: dict[tuple[str, str], float] = {}
        total = 0.0
        for key, p in self.table.items():
            x, z = key
            p = float(p)
            if p < -PROB_SUM_TOL:
                raise ValueError(f"negative probability {p!r} for {key!r}")
            p = max(0.0, p)
            clean[(str(x), str(z))] = p
            total += p
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1 within {PROB_SUM_TOL}")
        object.__setattr__(self, "table", MappingProxyType(clean))

    def prob(self, x: str, z: str) -> float:
        return self.table.get((x, z), 0.0)

    def marginal_x(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for (x, _), p in self.table.items():
            out[x] = out.get(x, 0.0) + p
        return out

    def marginal_z(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for (_, z), p in self.table.items():
            out[z] = out.get(z, 0.0) + p
        return out

    def to_json_dict(self) -> dict:
        return {
            "type": "joint_distribution",
            "entries": [
                {"x": x, "z": z, "prob": p}
                for (x, z), p in sorted(self.table.items())
            ],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "JointDistribution":
        _expect_type(data, "joint_distribution")
        table = {}
        for entry in data["entries"]:
            key = (entry["x"], entry["z"])
            if key in table:
                raise ValueError(f"duplicate entry {key!r}")
            table[key] = float(entry["prob"])
        return cls(table)


def _entropy_bits(probs: Iterable[float]) -> float:
    return -sum(p * math.log2(p) for p in probs if p > 0.0)


def mutual_information(joint: JointDistribution) -> float:
    """Shannon mutual information of a joint distribution, in bits."""
    hx = _entropy_bits(joint.marginal_x().values())
    hz = _entropy_bits(joint.marginal_z().values())
    hxz = _entropy_bits(joint.table.values())
    return max(0.0, hx + hz - hxz)


def total_variation(p: Mapping, q: Mapping) -> float:
    """Total variation distance ``0.5 * sum |p - q|`` over the key union."""
    keys = set(p) | set(q)
    tv = 0.5 * sum(abs(float(p.get(k, 0.0)) - float(q.get(k, 0.0))) for k in keys)
    return min(1.0, max(0.0, tv))


def _complex_matrix_to_json(m: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def _complex_matrix_from_json(rows) -> np.ndarray:
    try:
        m = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=np.complex128)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"malformed complex matrix: {exc}") from None
    if m.ndim != 2:
        raise ValueError("malformed complex matrix: not a 2-d table")
    return m


def _expect_type(data: Mapping, expected: str) -> None:
    if not isinstance(data, Mapping):
        raise ValueError(f"expected a JSON object for {expected!r}")
    got = data.get("type")
    if got != expected:
        raise ValueError(f"expected object of type {expected!r}, got {got!r}")

"""Shared fixtures, random-object factories and independent oracles.

The factories here deliberately construct objects through a different
route than the package internals (Ginibre sampling, nuclear norms via
SVD, block-diagonal embeddings via kron) so that agreement between the
two is evidence, not tautology.
"""

import math

import numpy as np
from hypothesis import HealthCheck, settings

from qkdlab.quantum_core import PERP, CqState, DensityOperator, Povm

settings.register_profile(
    "suite",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

# One line per acceptance criterion, collected by the acceptance tests
# and printed after the run (the summary hook survives output capture).
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rand_density(rng: np.random.Generator, dim: int, rank: int | None = None) -> DensityOperator:
    """Ginibre-sampled density operator (full rank unless ``rank`` given)."""
    r = rank or dim
    g = rng.normal(size=(dim, r)) + 1j * rng.normal(size=(dim, r))
    m = g @ g.conj().T
    return DensityOperator(m / np.trace(m).real)


def rand_pure_vec(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def rand_povm(rng: np.random.Generator, dim: int, outcomes: int) -> Povm:
    """Random POVM: PSD pieces whitened by the inverse square root of their sum."""
    mats = []
    for _ in range(outcomes):
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        mats.append(g @ g.conj().T)
    s = np.sum(mats, axis=0)
    w, v = np.linalg.eigh(s)
    inv_sqrt = (v * (w**-0.5)) @ v.conj().T
    return Povm(tuple((str(i), inv_sqrt @ m @ inv_sqrt) for i, m in enumerate(mats)))


def rand_cq(
    rng: np.random.Generator,
    key_len: int,
    dim: int,
    include_perp: bool = False,
    max_branches: int | None = None,
) -> CqState:
    labels = [format(i, f"0{key_len}b") for i in range(2**key_len)]
    if max_branches is not None and max_branches < len(labels):
        picked = rng.choice(len(labels), size=max_branches, replace=False)
        labels = [labels[i] for i in picked]
    if include_perp:
        labels.append(PERP)
    probs = rng.dirichlet(np.ones(len(labels)))
    branches = {
        label: (float(p), rand_density(rng, dim)) for label, p in zip(labels, probs)
    }
    return CqState(key_len=key_len, branches=branches)


def dense_embedding(cq: CqState, label_order: list[str]) -> np.ndarray:
    """Block-diagonal classical-quantum embedding over a fixed label order."""
    dim = cq.dim
    size = len(label_order) * dim
    out = np.zeros((size, size), dtype=np.complex128)
    for idx, label in enumerate(label_order):
        entry = cq.branches.get(label)
        if entry is None:
            continue
        p, rho = entry
        sl = slice(idx * dim, (idx + 1) * dim)
        out[sl, sl] = p * rho.matrix
    return out


def nuclear_trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Trace distance through the nuclear norm (SVD route)."""
    return 0.5 * float(np.linalg.norm(a - b, "nuc"))


def entropy_bits(probs) -> float:
    return -sum(p * math.log2(p) for p in probs if p > 0.0)

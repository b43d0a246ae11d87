"""Epsilon-style security metrics for keys with quantum side information.

The functions here quantify, for a cq-state describing a produced key
and the adversary register:

* correctness (probability the two parties' keys differ),
* robustness (abort probability),
* secrecy, bracketed between an explicit-distinguisher lower bound and
  the trace distance to a canonical ideal state (upper bound),
* an accessible-information lower bound found by measurement search,
* the Ben-Or style sufficiency threshold relating accessible
  information to a secrecy epsilon, and
* the union-bound total epsilon.

The true secrecy epsilon minimises the trace distance over all ideal
states; it is deliberately bracketed rather than computed: the
canonical ideal (same abort mass, branch-averaged register) gives the
upper bound and concrete measure-then-decide strategies give the lower
bound.  By data processing the bracket always closes correctly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .quantum_core import (
    PERP,
    DEFAULT_DIM_CAP,
    CqState,
    DensityOperator,
    Povm,
    cq_measure,
    cq_trace_distance,
    measure,
    mutual_information,
    product_qubit_povm,
)

__all__ = [
    "IdealForm",
    "SecurityReport",
    "IaccSearchResult",
    "correctness_eps",
    "clopper_pearson_upper",
    "robustness_eps",
    "canonical_ideal",
    "secrecy_eps_upper",
    "secrecy_eps_lower",
    "strategy_acceptance",
    "distinguishing_advantage",
    "optimal_decision_rule",
    "default_strategies",
    "accessible_info_lower",
    "ben_or_sufficient_eps",
    "compose_report",
    "evaluate_cq_security",
    "QUBIT_BASIS_ANGLES",
]

# Single-qubit measurement bases used by the accessible-information
# search: computational, diagonal, and the intermediate (Breidbart)
# basis halfway between them.
QUBIT_BASIS_ANGLES: dict[str, float] = {
    "std": 0.0,
    "diag": math.pi / 4,
    "breidbart": math.pi / 8,
}

# A strategy is (measurement, decide): the measurement is either one
# Povm applied to every branch, or a mapping/callable from key label to
# Povm (the distinguisher reads the classical register first); decide
# maps (key label, outcome label) to accept (1) or reject (0).
DecisionRule = Callable[[str, str], int]
MeasurementLike = Povm | Mapping[str, Povm] | Callable[[str], Povm]
Strategy = tuple[MeasurementLike, DecisionRule]


def correctness_eps(outcomes) -> float:
    """Probability that the two parties' outputs disagree.

    Accepts either an explicit distribution (mapping ``(s_a, s_b) ->
    prob``, evaluated exactly) or a sample set (iterable of ``(s_a,
    s_b)`` pairs).  For samples the return value is a one-sided 99%
    Clopper-Pearson upper confidence bound on the disagreement
    probability: epsilon_c guards a failure event, so only
    overestimates are safe.
    """
    if isinstance(outcomes, Mapping):
        total = 0.0
        bad = 0.0
        for (sa, sb), p in outcomes.items():
            p = float(p)
            if p < -1e-12:
                raise ValueError(f"negative probability {p!r}")
            total += p
            if sa != sb:
                bad += p
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        return min(1.0, max(0.0, bad))
    samples = list(outcomes)
    if not samples:
        raise ValueError("empty sample set")
    failures = sum(1 for sa, sb in samples if sa != sb)
    return clopper_pearson_upper(failures, len(samples))


def clopper_pearson_upper(failures: int, trials: int, confidence: float = 0.99) -> float:
    """One-sided exact binomial (Clopper-Pearson) upper bound."""
    if trials <= 0 or failures < 0 or failures > trials:
        raise ValueError("need 0 <= failures <= trials, trials > 0")
    if failures >= trials:
        return 1.0
    return float(stats.beta.ppf(confidence, failures + 1, trials - failures))


def robustness_eps(label_distribution: Mapping[str, float]) -> float:
    """Abort probability: the mass the output places on the abort label."""
    total = sum(float(p) for p in label_distribution.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    return min(1.0, max(0.0, float(label_distribution.get(PERP, 0.0))))


@dataclass(frozen=True, eq=False)
class IdealForm:
    """Ideal-state template: uniform key tensor a fixed register.

    ``p_perp`` of the mass sits on the abort branch with register
    ``rho_dblprime``; the rest is uniform over all keys with the single
    register state ``rho_prime``.
    """

    p_perp: float
    rho_prime: DensityOperator
    rho_dblprime: DensityOperator

    def __post_init__(self):
        if not 0.0 <= self.p_perp <= 1.0:
            raise ValueError("p_perp must lie in [0, 1]")
        if self.rho_prime.dim != self.rho_dblprime.dim:
            raise ValueError("register dimensions differ")

    def to_cq(self, key_len: int, max_key_len: int = 16) -> CqState:
        """Materialise the template as a cq-state over ``key_len`` bits."""
        if key_len > max_key_len:
            raise ValueError(f"refusing to enumerate 2^{key_len} branches")
        branches: dict[str, tuple[float, DensityOperator]] = {}
        key_mass = 1.0 - self.p_perp
        if key_mass > 0.0:
            p = key_mass / 2**key_len
            for i in range(2**key_len):
                label = format(i, f"0{key_len}b") if key_len else ""
                branches[label] = (p, self.rho_prime)
        if self.p_perp > 0.0:
            branches[PERP] = (self.p_perp, self.rho_dblprime)
        return CqState(key_len=key_len, branches=branches)


def canonical_ideal(cq: CqState) -> IdealForm:
    """Canonical ideal template for a given cq-state.

    Keeps the input's abort mass, replaces the keyed branches by their
    probability-weighted average register (fully mixed when no key mass
    exists), and reuses the input's abort register (fully mixed when
    there is none).  This pins down one explicit member of the ideal
    family; the distance to it upper-bounds the true secrecy epsilon.
    """
    dim = cq.dim
    p_perp = cq.p_perp
    key_mass = 0.0
    acc = np.zeros((dim, dim), dtype=np.complex128)
    for label, (p, rho) in cq.branches.items():
        if label == PERP:
            continue
        key_mass += p
        acc += p * rho.matrix
    if key_mass > 1e-12:
        rho_prime = DensityOperator(acc / key_mass)
    else:
        rho_prime = DensityOperator.fully_mixed(dim)
    if p_perp > 0.0 and PERP in cq.branches:
        rho_dblprime = cq.branches[PERP][1]
    else:
        rho_dblprime = DensityOperator.fully_mixed(dim)
    return IdealForm(p_perp=p_perp, rho_prime=rho_prime, rho_dblprime=rho_dblprime)


def secrecy_eps_upper(cq: CqState) -> float:
    """Trace distance from the cq-state to its canonical ideal."""
    ideal = canonical_ideal(cq).to_cq(cq.key_len)
    return cq_trace_distance(cq, ideal)


def _povm_for(measurement: MeasurementLike, label: str) -> Povm:
    if isinstance(measurement, Povm):
        return measurement
    if callable(measurement):
        return measurement(label)
    return measurement[label]


def strategy_acceptance(cq: CqState, strategy: Strategy) -> float:
    """Exact acceptance probability of a measure-then-decide strategy."""
    measurement, decide = strategy
    total = 0.0
    for label, (p, rho) in cq.branches.items():
        if p == 0.0:
            continue
        povm = _povm_for(measurement, label)
        outcome_probs = measure(rho, povm)
        total += p * sum(pr for z, pr in outcome_probs.items() if decide(label, z))
    return total


def distinguishing_advantage(cq_real: CqState, cq_ideal: CqState, strategy: Strategy) -> float:
    """Acceptance gap of one strategy between two cq-states (exact)."""
    return strategy_acceptance(cq_real, strategy) - strategy_acceptance(cq_ideal, strategy)


def secrecy_eps_lower(cq: CqState, strategies: Sequence[Strategy]) -> float:
    """Best exact distinguishing advantage against the canonical ideal.

    Every strategy is a physically realisable distinguisher, so by data
    processing its advantage can never exceed the trace distance to the
    canonical ideal; the maximum over the supplied list is therefore a
    certified lower end of the secrecy bracket.  Computed by exact
    enumeration, no sampling.
    """
    if not strategies:
        raise ValueError("need at least one strategy")
    ideal = canonical_ideal(cq).to_cq(cq.key_len)
    best = max(distinguishing_advantage(cq, ideal, s) for s in strategies)
    return min(1.0, max(0.0, best))


def optimal_decision_rule(cq_real: CqState, cq_ideal: CqState, measurement: MeasurementLike) -> DecisionRule:
    """Best decision rule for a fixed measurement: accept where real outweighs ideal."""

    def conditioned_table(cq: CqState) -> dict[tuple[str, str], float]:
        table: dict[tuple[str, str], float] = {}
        for label, (p, rho) in cq.branches.items():
            if p == 0.0:
                continue
            for z, pr in measure(rho, _povm_for(measurement, label)).items():
                table[(label, z)] = p * pr
        return table

    real = conditioned_table(cq_real)
    ideal = conditioned_table(cq_ideal)
    accept = {k for k in set(real) | set(ideal) if real.get(k, 0.0) > ideal.get(k, 0.0)}
    return lambda label, z: int((label, z) in accept)


def _haar_basis(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    # fix the phase ambiguity so the distribution is Haar
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return q.T.conj()


def default_strategies(cq: CqState, num_random: int = 8, seed: int = 0) -> list[Strategy]:
    """A reasonable stock of distinguishers for ``secrecy_eps_lower``.

    Includes the classical-register-only test (trivial measurement plus
    the optimal label rule), the label-conditioned per-qubit measurement
    that reads the first qubits' bases off the key label (this is what
    breaks basis-encoded states), and ``num_random`` Haar-random basis
    measurements, each paired with its optimal decision rule.
    """
    ideal = canonical_ideal(cq).to_cq(cq.key_len)
    dim = cq.dim
    strategies: list[Strategy] = []

    trivial = Povm((("0", np.eye(dim, dtype=np.complex128)),), _trusted=True)
    strategies.append((trivial, optimal_decision_rule(cq, ideal, trivial)))

    nq = dim.bit_length() - 1
    if dim == 2**nq and 1 <= nq <= cq.key_len:
        cache: dict[str, Povm] = {}

        def label_basis_povm(label: str) -> Povm:
            prefix = label[:nq] if label != PERP else "0" * nq
            if prefix not in cache:
                angles = [QUBIT_BASIS_ANGLES["diag"] if b == "1" else 0.0 for b in prefix]
                cache[prefix] = product_qubit_povm(angles)
            return cache[prefix]

        strategies.append(
            (label_basis_povm, optimal_decision_rule(cq, ideal, label_basis_povm))
        )

    rng = np.random.default_rng(seed)
    for _ in range(num_random):
        povm = Povm.from_basis(_haar_basis(dim, rng))
        strategies.append((povm, optimal_decision_rule(cq, ideal, povm)))
    return strategies


@dataclass(frozen=True)
class IaccSearchResult:
    """Outcome of an accessible-information search (a lower bound)."""

    bits: float
    family: tuple[str, ...]
    best_strategy: str
    evaluations: int
    seed: int
    budget: int


def _qubit_count(dim: int) -> int | None:
    n = dim.bit_length() - 1
    return n if dim == 2**n else None


def _povm_information(cq: CqState, povm: Povm) -> float:
    return mutual_information(cq_measure(cq, povm))


def accessible_info_lower(
    cq: CqState,
    search_budget: int = 64,
    rng_seed: int = 0,
    families: Sequence[str] = ("per_qubit", "random", "hill_climb"),
    exhaustive_work_cap: int = 10**9,
) -> IaccSearchResult:
    """Lower-bound the accessible information ``max_Z I(S : Z)`` by search.

    Three measurement families are tried (any subset can be selected):

    * ``per_qubit``: products of computational / diagonal / Breidbart
      single-qubit bases when the register is a qubit register.  The
      3^n family is enumerated exhaustively while the estimated work
      stays under ``exhaustive_work_cap``; beyond that, ``search_budget``
      members are sampled.
    * ``random``: ``search_budget`` Haar-random rank-1 basis measurements.
    * ``hill_climb``: coordinate ascent over per-qubit rotation angles,
      seeded at the best per-qubit member, spending at most
      ``search_budget`` measurement evaluations.

    Every candidate is scored by the exact mutual information of the
    induced joint distribution, so the maximum found is a certified
    lower bound on the accessible information.
    """
    if search_budget <= 0:
        raise ValueError("search_budget must be positive")
    if cq.dim > DEFAULT_DIM_CAP:
        raise ValueError(f"register dimension {cq.dim} exceeds cap {DEFAULT_DIM_CAP}")
    unknown = set(families) - {"per_qubit", "random", "hill_climb"}
    if unknown:
        raise ValueError(f"unknown families: {sorted(unknown)}")

    rng = np.random.default_rng(rng_seed)
    nq = _qubit_count(cq.dim)
    basis_names = list(QUBIT_BASIS_ANGLES)
    best_bits = 0.0
    best_desc = "none"
    evaluations = 0
    searched: list[str] = []

    best_angles: list[float] | None = None
    if "per_qubit" in families and nq is not None and nq >= 1:
        work = (3**nq) * len(cq.branches) * (2**nq) * cq.dim
        if work <= exhaustive_work_cap:
            assignments = itertools.product(basis_names, repeat=nq)
            searched.append("per_qubit_exhaustive")
        else:
            assignments = (
                tuple(basis_names[i] for i in rng.integers(0, 3, size=nq))
                for _ in range(search_budget)
            )
            searched.append("per_qubit_sampled")
        for names in assignments:
            angles = [QUBIT_BASIS_ANGLES[b] for b in names]
            bits = _povm_information(cq, product_qubit_povm(angles))
            evaluations += 1
            if bits > best_bits:
                best_bits = bits
                best_desc = "per_qubit:" + ",".join(names)
                best_angles = angles

    if "random" in families:
        searched.append("random_bases")
        for k in range(search_budget):
            povm = Povm.from_basis(_haar_basis(cq.dim, rng))
            bits = _povm_information(cq, povm)
            evaluations += 1
            if bits > best_bits:
                best_bits = bits
                best_desc = f"random_basis:{k}"

    if "hill_climb" in families and nq is not None and nq >= 1:
        searched.append("hill_climb")
        angles = list(best_angles) if best_angles is not None else [0.0] * nq
        current = _povm_information(cq, product_qubit_povm(angles))
        spent = 1
        step = math.pi / 8
        while step > 1e-4 and spent < search_budget:
            improved = False
            for i in range(nq):
                for delta in (step, -step):
                    if spent >= search_budget:
                        break
                    trial = list(angles)
                    trial[i] = (trial[i] + delta) % math.pi
                    bits = _povm_information(cq, product_qubit_povm(trial))
                    spent += 1
                    if bits > current + 1e-15:
                        angles, current, improved = trial, bits, True
            if not improved:
                step /= 2
        evaluations += spent
        if current > best_bits:
            best_bits = current
            best_desc = "hill_climb:" + ",".join(f"{a:.6f}" for a in angles)

    return IaccSearchResult(
        bits=max(0.0, best_bits),
        family=tuple(searched),
        best_strategy=best_desc,
        evaluations=evaluations,
        seed=rng_seed,
        budget=search_budget,
    )


def ben_or_sufficient_eps(iacc_bits: float, key_len: int) -> float:
    """Smallest epsilon certified by an accessible-information bound.

    Inverts the sufficiency condition ``iacc <= 2^-(key_len + 2) *
    eps^2``: a key whose accessible information is below that threshold
    is eps-secret.  Clamped to 1 when no epsilon in [0, 1] is certified.
    """
    if iacc_bits < 0:
        raise ValueError("iacc_bits must be nonnegative")
    if key_len < 0:
        raise ValueError("key_len must be nonnegative")
    return min(1.0, math.sqrt(iacc_bits * 2.0 ** (key_len + 2)))


def compose_report(eps_correct: float, eps_secret: float, eps_robust: float) -> float:
    """Union-bound total epsilon, clamped to 1."""
    for name, value in (("eps_correct", eps_correct), ("eps_secret", eps_secret), ("eps_robust", eps_robust)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name}={value!r} outside [0, 1]")
    return min(1.0, eps_correct + eps_secret + eps_robust)


@dataclass(frozen=True)
class SecurityReport:
    """Bundle of the security figures for one produced key."""

    key_len: int
    eps_correct: float
    eps_robust: float
    eps_secret_lower: float
    eps_secret_upper: float
    iacc_lower_bits: float
    eps_total: float
    provenance: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("eps_correct", "eps_robust", "eps_secret_lower", "eps_secret_upper", "eps_total"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value!r} outside [0, 1]")
        if self.eps_secret_lower > self.eps_secret_upper + 1e-9:
            raise ValueError("secrecy lower bound exceeds upper bound")
        if not -1e-9 <= self.iacc_lower_bits <= self.key_len + 1e-9:
            raise ValueError("iacc_lower_bits outside [0, key_len]")
        object.__setattr__(self, "provenance", MappingProxyType(dict(self.provenance)))

    def to_json_dict(self) -> dict:
        return {
            "type": "security_report",
            "key_len": self.key_len,
            "eps_correct": self.eps_correct,
            "eps_robust": self.eps_robust,
            "eps_secret_lower": self.eps_secret_lower,
            "eps_secret_upper": self.eps_secret_upper,
            "iacc_lower_bits": self.iacc_lower_bits,
            "eps_total": self.eps_total,
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "SecurityReport":
        if data.get("type") != "security_report":
            raise ValueError(f"expected a security_report object, got {data.get('type')!r}")
        return cls(
            key_len=int(data["key_len"]),
            eps_correct=float(data["eps_correct"]),
            eps_robust=float(data["eps_robust"]),
            eps_secret_lower=float(data["eps_secret_lower"]),
            eps_secret_upper=float(data["eps_secret_upper"]),
            iacc_lower_bits=float(data["iacc_lower_bits"]),
            eps_total=float(data["eps_total"]),
            provenance=dict(data.get("provenance", {})),
        )


def evaluate_cq_security(
    cq: CqState,
    *,
    strategies: Sequence[Strategy] | None = None,
    num_random_strategies: int = 8,
    search_budget: int = 64,
    seed: int = 0,
    iacc_families: Sequence[str] = ("per_qubit", "random", "hill_climb"),
    correctness=None,
) -> SecurityReport:
    """Assemble a full :class:`SecurityReport` for a cq-state.

    Correctness needs the joint distribution (or samples) of both
    parties' outputs, which a cq-state over one party does not carry;
    pass it via ``correctness`` or it is reported as 0 with a note in
    the provenance.  The total epsilon uses the conservative end of the
    secrecy bracket.
    """
    if strategies is None:
        strategies = default_strategies(cq, num_random=num_random_strategies, seed=seed)
    eps_c = 0.0 if correctness is None else correctness_eps(correctness)
    eps_r = robustness_eps(cq.label_distribution())
    upper = secrecy_eps_upper(cq)
    lower = secrecy_eps_lower(cq, strategies)
    iacc = accessible_info_lower(cq, search_budget=search_budget, rng_seed=seed, families=iacc_families)
    return SecurityReport(
        key_len=cq.key_len,
        eps_correct=eps_c,
        eps_robust=eps_r,
        eps_secret_lower=min(lower, upper),
        eps_secret_upper=upper,
        iacc_lower_bits=min(iacc.bits, float(cq.key_len)),
        eps_total=compose_report(eps_c, upper, eps_r),
        provenance={
            "strategy_count": len(strategies),
            "iacc_family": list(iacc.family),
            "iacc_best_strategy": iacc.best_strategy,
            "iacc_evaluations": iacc.evaluations,
            "search_budget": search_budget,
            "seed": seed,
            "correctness_source": (
                "assumed_zero" if correctness is None
                else ("distribution" if isinstance(correctness, Mapping) else "samples")
            ),
        },
    )

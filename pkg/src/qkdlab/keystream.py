"""Epsilon budgeting for an unbounded authenticated key stream.

A short initial secret seeds round 1; each round i consumes the stored
key of the previous round (length ell_{i-1}) to authenticate its
classical traffic, produces ell_i + ell fresh bits, stores ell_i for
the next round, and emits ell to the consumer stream.  Per-round
failure is bounded by

    eps_i <= exp(-gamma (rate_rho n_i - ell_i - ell)) + exp(-nu ell_{i-1} + ln n_i)

with the published sizes growing linearly, ``n_i = n0 + ceil(c i)`` and
``ell_i = ell + ceil(c rate_rho i / 2)``, so the stream's total epsilon
is a convergent series summable in closed form.  ``log`` in the second
exponent is read as the natural logarithm; the default rate constants
are RATE_RHO_DEFAULT = 1e-2 and GAMMA_DEFAULT = NU_DEFAULT = 1e-3.

The module also contains an exact bit-conservation simulator for the
store/consume/emit ledger, which is where accounting bugs would hide.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "GAMMA_DEFAULT",
    "NU_DEFAULT",
    "RATE_RHO_DEFAULT",
    "StreamParams",
    "RoundRecord",
    "StreamBudget",
    "PlanningError",
    "KeyLedgerUnderflow",
    "MockKeySource",
    "RoundLedger",
    "StreamLog",
    "round_eps",
    "schedule",
    "schedule_csv",
    "total_eps",
    "plan",
    "simulate_stream",
]

GAMMA_DEFAULT = 1e-3
NU_DEFAULT = 1e-3
RATE_RHO_DEFAULT = 1e-2

_EXP_MAX = 700.0  # math.exp overflows just above 709


def _safe_exp(x: float) -> float:
    return math.exp(min(x, _EXP_MAX))


@dataclass(frozen=True)
class StreamParams:
    """Parameters of the key-stream schedule.

    ``n0``/``c`` size the per-round signal counts, ``ell`` is the
    per-round output length, ``ell0`` the initial stored secret, and
    ``eps0`` the epsilon charged for producing that initial secret.
    The planner additionally enforces ``rate_rho * n0 > 2 * ell`` so
    the first exponent decays; the constructor does not, since the
    clamped epsilon formula stays well defined without it.
    """

    gamma: float = GAMMA_DEFAULT
    rate_rho: float = RATE_RHO_DEFAULT
    nu: float = NU_DEFAULT
    n0: int = 1_000_000
    c: float = 1_000_000.0
    ell: int = 256
    ell0: int = 40_000
    eps0: float = 0.0

    def __post_init__(self):
        for name in ("gamma", "rate_rho", "nu", "c"):
            if not float(getattr(self, name)) > 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("n0", "ell", "ell0"):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ValueError(f"{name} must be a positive integer")
        if not 0.0 <= self.eps0 <= 1.0:
            raise ValueError("eps0 must lie in [0, 1]")

    def signal_count(self, i: int, real_valued: bool = False) -> float | int:
        raw = self.n0 + self.c * i
        return raw if real_valued else self.n0 + math.ceil(self.c * i)

    def stored_len(self, i: int, real_valued: bool = False) -> float | int:
        """Length of the key stored by round i (consumed by round i+1)."""
        if i == 0:
            return self.ell0
        raw = self.c * self.rate_rho * i / 2.0
        return self.ell + (raw if real_valued else math.ceil(raw))

    def to_json_dict(self) -> dict:
        return {
            "type": "stream_params",
            "gamma": self.gamma,
            "rate_rho": self.rate_rho,
            "nu": self.nu,
            "n0": self.n0,
            "c": self.c,
            "ell": self.ell,
            "ell0": self.ell0,
            "eps0": self.eps0,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "StreamParams":
        if data.get("type") != "stream_params":
            raise ValueError(f"expected a stream_params object, got {data.get('type')!r}")
        return cls(
            gamma=float(data["gamma"]),
            rate_rho=float(data["rate_rho"]),
            nu=float(data["nu"]),
            n0=int(data["n0"]),
            c=float(data["c"]),
            ell=int(data["ell"]),
            ell0=int(data["ell0"]),
            eps0=float(data["eps0"]),
        )


@dataclass(frozen=True)
class RoundRecord:
    """One scheduled round: sizes, the two epsilon terms, and their clamped sum."""

    i: int
    n_i: float
    ell_i: float
    eps_i: float
    term_signal: float
    term_auth: float
    clamped: bool


def _round_terms(p: StreamParams, n_i: float, ell_i: float, ell_prev: float) -> tuple[float, float]:
    t_signal = _safe_exp(-p.gamma * (p.rate_rho * n_i - ell_i - p.ell))
    t_auth = _safe_exp(-p.nu * ell_prev + math.log(n_i))
    return t_signal, t_auth


def round_eps(p: StreamParams, i: int, ell_prev: float, n_i: float, ell_i: float) -> float:
    """Per-round epsilon bound, clamped into [0, 1].

    The unclamped value is ``exp(-gamma (rate_rho n_i - ell_i - ell)) +
    exp(-nu ell_prev + ln n_i)``; blow-ups are handled by the clamp
    rather than an error (the schedule records carry a flag).
    """
    if i < 1:
        raise ValueError("rounds are numbered from 1")
    t1, t2 = _round_terms(p, n_i, ell_i, ell_prev)
    return min(1.0, t1 + t2)


def schedule(p: StreamParams, rounds: int, real_valued: bool = False) -> list[RoundRecord]:
    """Records for rounds 1..rounds.

    Integer mode (default) applies the ceilings; ``real_valued`` drops
    them, which makes the signal-term epsilons exactly geometric with
    ratio ``exp(-gamma c rate_rho / 2)`` and exists so that algebraic
    identities can be tested exactly.
    """
    if rounds < 1:
        raise ValueError("need at least one round")
    records = []
    for i in range(1, rounds + 1):
        n_i = p.signal_count(i, real_valued)
        ell_i = p.stored_len(i, real_valued)
        ell_prev = p.stored_len(i - 1, real_valued)
        t1, t2 = _round_terms(p, n_i, ell_i, ell_prev)
        raw = t1 + t2
        records.append(
            RoundRecord(
                i=i,
                n_i=n_i,
                ell_i=ell_i,
                eps_i=min(1.0, raw),
                term_signal=t1,
                term_auth=t2,
                clamped=raw > 1.0,
            )
        )
    return records


def schedule_csv(records: list[RoundRecord]) -> str:
    """RFC 4180 CSV export of a schedule (with a running epsilon sum)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["i", "n_i", "ell_i", "eps_i", "cumulative_eps"])
    cumulative = 0.0
    for r in records:
        cumulative += r.eps_i
        writer.writerow([r.i, r.n_i, r.ell_i, repr(r.eps_i), repr(cumulative)])
    return buf.getvalue()


@dataclass(frozen=True)
class StreamBudget:
    """Total-epsilon accounting: explicit rounds plus an infinite-tail bound."""

    horizon: int
    real_valued: bool
    partial_sum: float
    tail_bound: float
    eps_total: float
    divergent: bool

    def to_json_dict(self) -> dict:
        return {
            "type": "stream_budget",
            "horizon": self.horizon,
            "real_valued": self.real_valued,
            "partial_sum": self.partial_sum,
            "tail_bound": self.tail_bound,
            "eps_total": self.eps_total,
            "divergent": self.divergent,
        }


def total_eps(p: StreamParams, horizon: int = 200, real_valued: bool = False) -> StreamBudget:
    """Upper bound on the whole stream's epsilon: ``eps0 + partial + tail``.

    Rounds 1..horizon are summed explicitly.  Beyond the horizon both
    term families decay geometrically (ratios ``exp(-gamma c rate_rho/2)``
    and ``exp(-nu c rate_rho/2)``) and are bounded by closed forms: a
    geometric tail for the signal terms and an arithmetico-geometric
    tail for the authentication terms.  In integer mode each ceiling can
    lift a term above its real-valued value by at most ``exp(gamma)``
    (signal) or ``exp(1/n0)`` (authentication), and the tails carry those
    safety factors.  The series converges for any valid parameters; the
    ``divergent`` flag covers the (constructor-excluded) degenerate case
    and numeric overflow, in which case ``eps_total`` is reported as 1.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    records = schedule(p, horizon, real_valued)
    partial = sum(r.eps_i for r in records)

    g1 = p.gamma * p.c * p.rate_rho / 2.0
    g2 = p.nu * p.c * p.rate_rho / 2.0
    divergent = not (g1 > 0.0 and g2 > 0.0)
    if divergent:
        return StreamBudget(horizon, real_valued, partial, math.inf, 1.0, True)

    # signal terms: t1(i) = exp(-gamma (rate_rho n0 - 2 ell)) * q1^i
    log_q1 = -g1
    denom1 = -math.expm1(log_q1)
    log_tail1 = -p.gamma * (p.rate_rho * p.n0 - 2.0 * p.ell) + (horizon + 1) * log_q1 - math.log(denom1)
    if not real_valued:
        log_tail1 += p.gamma
    tail1 = _safe_exp(log_tail1)

    # authentication terms: t2(i) = (n0 + c i) exp(-nu ell) * q2^(i-1)
    log_q2 = -g2
    denom2 = -math.expm1(log_q2)
    q2 = math.exp(log_q2)
    bracket = (p.n0 + p.c * (horizon + 1)) / denom2 + p.c * q2 / (denom2 * denom2)
    log_tail2 = -p.nu * p.ell + horizon * log_q2 + math.log(bracket)
    if not real_valued:
        log_tail2 += 1.0 / p.n0
    tail2 = _safe_exp(log_tail2)

    tail = tail1 + tail2
    total = p.eps0 + partial + tail
    if not math.isfinite(total):
        return StreamBudget(horizon, real_valued, partial, math.inf, 1.0, True)
    return StreamBudget(horizon, real_valued, partial, tail, min(1.0, total), False)


class PlanningError(ValueError):
    """Raised when no schedule within the search bounds meets the target."""

    def __init__(self, message: str, best_params: "StreamParams | None" = None, best_budget: "StreamBudget | None" = None):
        super().__init__(message)
        self.best_params = best_params
        self.best_budget = best_budget


def plan(
    target_eps: float,
    gamma: float = GAMMA_DEFAULT,
    rate_rho: float = RATE_RHO_DEFAULT,
    nu: float = NU_DEFAULT,
    eps0: float = 0.0,
    ell: int = 256,
    horizon: int = 200,
    max_n0: int = 2**40,
) -> StreamParams:
    """Smallest-n0 parameter set whose total epsilon meets the target.

    Deterministic grid-plus-bisection search: for each candidate n0 a
    small grid of growth constants c and initial-secret slacks is
    scored with :func:`total_eps`, n0 is swept geometrically to find a
    feasible point, then bisected down to the smallest feasible value.
    Tightening the target can only push n0 up.
    """
    if not 0.0 < target_eps <= 1.0:
        raise ValueError("target_eps must lie in (0, 1]")
    if target_eps <= eps0:
        raise ValueError("target_eps must exceed eps0")

    def candidates(n0: int):
        for c_mult in (0.5, 1.0, 2.0):
            for slack in (1.0, 1.25):
                decay = gamma * (rate_rho * n0 - 2.0 * ell)
                if decay <= 0.0:
                    continue
                c = max(1.0, c_mult * n0)
                ell0 = math.ceil(slack * (decay + math.log(n0 + c)) / nu)
                yield StreamParams(
                    gamma=gamma, rate_rho=rate_rho, nu=nu,
                    n0=n0, c=c, ell=ell, ell0=ell0, eps0=eps0,
                )

    def best_for(n0: int) -> tuple[StreamParams, StreamBudget] | None:
        best = None
        for params in candidates(n0):
            budget = total_eps(params, horizon)
            if budget.divergent:
                continue
            if best is None or budget.eps_total < best[1].eps_total:
                best = (params, budget)
        return best

    def feasible(n0: int) -> tuple[StreamParams, StreamBudget] | None:
        best = best_for(n0)
        if best is not None and best[1].eps_total <= target_eps:
            return best
        return None

    overall_best: tuple[StreamParams, StreamBudget] | None = None
    lo = max(1, math.ceil(2.0 * ell / rate_rho) + 1)
    hi = lo
    found = feasible(hi)
    while found is None:
        probe = best_for(hi)
        if probe is not None and (overall_best is None or probe[1].eps_total < overall_best[1].eps_total):
            overall_best = probe
        if hi > max_n0:
            raise PlanningError(
                f"no schedule with n0 <= {max_n0} reaches eps_total <= {target_eps}",
                best_params=overall_best[0] if overall_best else None,
                best_budget=overall_best[1] if overall_best else None,
            )
        lo = hi
        hi *= 2
        found = feasible(hi)

    # smallest feasible n0 in (lo, hi]
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if feasible(mid) is not None:
            hi = mid
        else:
            lo = mid
    final = feasible(hi)
    assert final is not None
    return final[0]


class KeyLedgerUnderflow(RuntimeError):
    """Stored key ran out: an accounting bug or an unaffordable retry policy."""


@dataclass
class MockKeySource:
    """Stand-in key source: fresh random bits, or an abort with fixed probability."""

    abort_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.abort_prob <= 1.0:
            raise ValueError("abort_prob must lie in [0, 1]")

    def generate(self, num_bits: int, rng: np.random.Generator) -> np.ndarray | None:
        if self.abort_prob > 0.0 and rng.random() < self.abort_prob:
            return None
        return rng.integers(0, 2, size=num_bits, dtype=np.uint8)


@dataclass(frozen=True)
class RoundLedger:
    i: int
    n_i: float
    ell_i: float
    attempts: int
    consumed_after: int
    stored_after: int
    emitted_after: int


@dataclass(frozen=True)
class StreamLog:
    params: StreamParams
    charge_per_attempt: bool
    rounds: tuple[RoundLedger, ...]
    stream_bits: np.ndarray
    total_retries: int

    @property
    def bits_emitted(self) -> int:
        return int(self.stream_bits.shape[0])


def simulate_stream(
    p: StreamParams,
    rounds: int,
    key_source: MockKeySource | Callable[[int, np.random.Generator], np.ndarray | None],
    rng: np.random.Generator,
    charge_per_attempt: bool = False,
    max_attempts_per_round: int = 100_000,
) -> StreamLog:
    """Run the stream, enforcing the bit-conservation ledger exactly.

    Each round consumes the previous round's stored key (``ell_{i-1}``
    bits of authentication material), stores ``ell_i`` and emits
    ``ell``.  An aborting round is retried with fresh randomness;
    retries reuse the round's already-consumed authentication budget by
    default, while ``charge_per_attempt=True`` deducts a fresh
    ``ell_{i-1}`` per attempt (strictly more conservative, and liable
    to exhaust the store since production never outpaces an unlucky
    retry run).  Running out of stored bits raises
    :class:`KeyLedgerUnderflow`; after every round the identity

        emitted + stored + consumed == produced + ell0

    is asserted over exact integers.
    """
    records = schedule(p, rounds)
    generate = key_source.generate if isinstance(key_source, MockKeySource) else key_source
    stored = p.ell0
    consumed = 0
    produced = 0
    emitted_chunks: list[np.ndarray] = []
    ledger: list[RoundLedger] = []
    total_retries = 0

    for rec in records:
        need = p.stored_len(rec.i - 1)
        attempts = 0
        if not charge_per_attempt:
            if stored < need:
                raise KeyLedgerUnderflow(f"round {rec.i}: need {need} bits, have {stored}")
            stored -= need
            consumed += need
        while True:
            attempts += 1
            if attempts > max_attempts_per_round:
                raise RuntimeError(f"round {rec.i}: exceeded {max_attempts_per_round} attempts")
            if charge_per_attempt:
                if stored < need:
                    raise KeyLedgerUnderflow(
                        f"round {rec.i}, attempt {attempts}: need {need} bits, have {stored}"
                    )
                stored -= need
                consumed += need
            bits = generate(int(rec.ell_i) + p.ell, rng)
            if bits is not None:
                break
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape != (int(rec.ell_i) + p.ell,):
            raise ValueError(f"key source returned {bits.shape}, expected {(int(rec.ell_i) + p.ell,)}")
        stored += int(rec.ell_i)
        produced += int(rec.ell_i) + p.ell
        emitted_chunks.append(bits[-p.ell:])
        total_retries += attempts - 1
        emitted_now = len(emitted_chunks) * p.ell
        if emitted_now + stored + consumed != produced + p.ell0:
            raise AssertionError(f"ledger broken at round {rec.i}")
        ledger.append(
            RoundLedger(
                i=rec.i,
                n_i=rec.n_i,
                ell_i=rec.ell_i,
                attempts=attempts,
                consumed_after=consumed,
                stored_after=stored,
                emitted_after=emitted_now,
            )
        )

    stream = np.concatenate(emitted_chunks) if emitted_chunks else np.zeros(0, dtype=np.uint8)
    return StreamLog(
        params=p,
        charge_per_attempt=charge_per_attempt,
        rounds=tuple(ledger),
        stream_bits=stream,
        total_retries=total_retries,
    )

"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Every criterion runs at its stated tolerance against the public API.
The summary block at the end of the pytest run lists one line per
criterion so the gate can be read off the terminal without digging
through the verbose log.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from conftest import (
    ACCEPTANCE_LINES,
    dense_embedding,
    nuclear_trace_distance,
    rand_cq,
    rand_density,
    rand_povm,
)

from qkdlab.attack_lab import (
    build_attack_state,
    fully_mixed_marginal_check,
    parity_guess_curve,
    parity_strategy,
    run_otp_attack,
    single_qubit_guess_oracle,
)
from qkdlab.composition_harness import (
    biased_key_source,
    compose,
    estimate_advantage,
    exact_optimal_advantage,
    otp_application,
    otp_majority_zeros_distinguisher,
    perfect_key_source,
    rsa_auction_sweep,
    verify_composition_bound,
)
from qkdlab.keystream import (
    MockKeySource,
    StreamParams,
    plan,
    schedule,
    simulate_stream,
    total_eps,
)
from qkdlab.quantum_core import cq_trace_distance, measure, total_variation, trace_distance
from qkdlab.security_metrics import (
    accessible_info_lower,
    ben_or_sufficient_eps,
    canonical_ideal,
    default_strategies,
    secrecy_eps_lower,
    secrecy_eps_upper,
    strategy_acceptance,
)


@contextmanager
def criterion(num: int, name: str):
    try:
        yield
    except BaseException:
        ACCEPTANCE_LINES.append(f"criterion {num:02d} FAIL  {name}")
        raise
    ACCEPTANCE_LINES.append(f"criterion {num:02d} PASS  {name}")


# ---------------------------------------------------------------------------


def test_criterion_01_attack_recovers_bit_with_certainty():
    with criterion(1, "pad attack succeeds in every one of 10^4 trials for n=2..5"):
        start = time.perf_counter()
        for n in (2, 3, 4, 5):
            rng = np.random.default_rng(12345 + n)
            message = "1" * (n + 1)
            successes = sum(
                run_otp_attack(n, message, rng).success for _ in range(10_000)
            )
            assert successes == 10_000, f"n={n}: {successes}/10000"
        elapsed = time.perf_counter() - start
        assert elapsed < 30.0, f"took {elapsed:.1f}s"


def test_criterion_02_marginal_is_fully_mixed():
    with criterion(2, "prefix-conditioned marginal equals I/2^n to 1e-9 for n=2..4"):
        for n in (2, 3, 4):
            check = fully_mixed_marginal_check(build_attack_state(n))
            assert check.passed
            assert check.max_deviation < 1e-9, f"n={n}: {check.max_deviation}"


def test_criterion_03_noncomposability_gap():
    with criterion(3, "parity distinguisher advantage 1/2 vs I_acc <= 0.2 bits at n=4"):
        n = 4
        state = build_attack_state(n)
        strategy = parity_strategy(n)

        lower = secrecy_eps_lower(state.cq, [strategy])
        assert lower >= 0.5 - 1e-9, f"lower {lower}"

        ideal_cq = canonical_ideal(state.cq).to_cq(state.cq.key_len)
        ideal_accept = strategy_acceptance(ideal_cq, strategy)
        assert abs(ideal_accept - 0.5) <= 1e-12, f"ideal acceptance {ideal_accept}"

        iacc = accessible_info_lower(state.cq, families=("per_qubit",))
        assert any(tag.startswith("per_qubit_exhaustive") for tag in iacc.family)
        assert iacc.bits <= 0.2, f"I_acc {iacc.bits}"

        oracle = single_qubit_guess_oracle()
        assert abs(oracle.p_star - math.cos(math.pi / 8) ** 2) <= 1e-6
        curve = dict(parity_guess_curve(n, p_star=oracle.p_star))
        assert abs(curve[4] - 0.625) <= 1e-9, f"curve(4) {curve[4]}"


def test_criterion_04_secrecy_bracket_and_cq_distance():
    with criterion(4, "eps bracket ordered and cq distance matches dense embedding"):
        rng = np.random.default_rng(404)
        checked = 0
        while checked < 100:
            key_len = int(rng.integers(1, 3))
            dim = int(rng.integers(2, 5))
            cq = rand_cq(rng, key_len, dim, include_perp=bool(rng.integers(0, 2)))
            lower = secrecy_eps_lower(cq, default_strategies(cq, num_random=4, seed=checked))
            upper = secrecy_eps_upper(cq)
            assert lower <= upper + 1e-12, f"#{checked}: {lower} > {upper}"

            ideal_cq = canonical_ideal(cq).to_cq(cq.key_len)
            labels = sorted(set(cq.branches) | set(ideal_cq.branches))
            dense = nuclear_trace_distance(
                dense_embedding(cq, labels), dense_embedding(ideal_cq, labels)
            )
            assert abs(cq_trace_distance(cq, ideal_cq) - dense) <= 1e-9
            assert abs(upper - dense) <= 1e-9  # upper end of the bracket is that distance
            checked += 1


def test_criterion_05_measurement_is_a_contraction():
    with criterion(5, "induced total variation never beats trace distance"):
        rng = np.random.default_rng(505)
        for idx in range(120):
            dim = int(rng.integers(2, 6))
            rho_a = rand_density(rng, dim)
            rho_b = rand_density(rng, dim)
            povm = rand_povm(rng, dim, int(rng.integers(2, 6)))
            tv = total_variation(measure(rho_a, povm), measure(rho_b, povm))
            td = trace_distance(rho_a, rho_b)
            assert tv <= td + 1e-9, f"#{idx}: tv {tv} > td {td}"


def test_criterion_06_composition_bound():
    with criterion(6, "additive epsilon bound, exact telescope and 10^5-trial check"):
        start = time.perf_counter()
        source = biased_key_source(1, p_zero=0.6)
        app = otp_application("1")
        distinguisher = otp_majority_zeros_distinguisher("1")

        report = verify_composition_bound(source, app, [distinguisher])
        assert report.mode == "exact"
        for row in report.rows:
            assert abs(row.telescope_residual) <= 1e-12
            assert row.within_bound
        assert report.all_within_bound

        eps_source = exact_optimal_advantage(source)
        composed = compose(source, app)
        est = estimate_advantage(
            composed,
            distinguisher.decide,
            mode="sample",
            trials=100_000,
            rng=np.random.default_rng(20260814),
        )
        assert est.advantage <= eps_source + est.half_width, (
            f"measured {est.advantage} > {eps_source} + {est.half_width}"
        )
        elapsed = time.perf_counter() - start
        assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_criterion_07_otp_on_uniform_key_is_perfect():
    with criterion(7, "real and ideal ciphertext distributions identical for m<=3"):
        for m in (1, 2, 3):
            source = perfect_key_source(m)
            for value in range(2**m):
                message = format(value, f"0{m}b")
                composed = compose(source, otp_application(message))
                real_c: dict = {}
                ideal_c: dict = {}
                for (_key, view), p in composed.real_dist.items():
                    real_c[view[-1]] = real_c.get(view[-1], 0.0) + p
                for (_key, view), p in composed.ideal_dist.items():
                    ideal_c[view[-1]] = ideal_c.get(view[-1], 0.0) + p
                assert real_c == ideal_c, f"m={m} message={message}"


def test_criterion_08_keystream_plan_and_decay():
    with criterion(8, "planned schedule meets 1e-9 and decays at the closed-form rate"):
        params = plan(1e-9)
        budget = total_eps(params, horizon=200)
        assert budget.eps_total <= 1e-9, f"re-evaluated {budget.eps_total}"

        records = schedule(params, 5, real_valued=True)
        expected = math.exp(-params.gamma * params.c * params.rate_rho / 2.0)
        for prev, cur in zip(records, records[1:]):
            ratio = cur.term_signal / prev.term_signal
            assert abs(ratio - expected) <= 1e-12
            assert abs(ratio / expected - 1.0) <= 1e-12

        again = total_eps(params, horizon=400)
        assert abs(budget.eps_total - again.eps_total) <= 1e-12


def test_criterion_09_stream_ledger_conservation():
    with criterion(9, "10^4-round ledger conserves bits; retries match geometry"):
        p = StreamParams(
            gamma=1e-3, rate_rho=1e-2, nu=1e-3, n0=1000, c=1.0, ell=8, ell0=16
        )
        abort = 0.1
        rounds = 10_000
        rng = np.random.default_rng(909)
        log = simulate_stream(p, rounds, MockKeySource(abort_prob=abort), rng)

        assert len(log.rounds) == rounds
        assert log.bits_emitted == rounds * p.ell
        produced = 0
        for rec in log.rounds:
            produced += int(rec.ell_i) + p.ell
            assert rec.emitted_after + rec.stored_after + rec.consumed_after == produced + p.ell0
            assert rec.stored_after == p.stored_len(rec.i)  # never dips below plan

        mean = rounds * abort / (1.0 - abort)
        sigma = math.sqrt(rounds * abort / (1.0 - abort) ** 2)
        assert abs(log.total_retries - mean) <= 3.0 * sigma, (
            f"{log.total_retries} vs {mean:.0f} +- {3 * sigma:.0f}"
        )


def test_criterion_10_ben_or_closed_form():
    with criterion(10, "closed-form sufficient epsilon checked on 10^3 random inputs"):
        rng = np.random.default_rng(1010)
        for idx in range(1000):
            key_len = int(rng.integers(1, 17))
            iacc = float(10.0 ** rng.uniform(-12, math.log10(key_len)))
            eps = ben_or_sufficient_eps(iacc, key_len)
            scale = 2.0 ** (key_len + 2)
            assert 0.0 < eps <= 1.0
            if eps < 1.0:
                # sufficient, and not slack by more than float error
                assert eps * eps >= iacc * scale * (1.0 - 1e-12), f"#{idx}"
                assert (eps * (1.0 - 1e-9)) ** 2 < iacc * scale, f"#{idx} not minimal"
            else:
                assert iacc * scale >= 1.0 - 1e-12, f"#{idx} clamp too early"


def test_criterion_11_rsa_forgery_always_wins():
    with criterion(11, "forged ciphertext opens to twice the bid in 10^3 auctions"):
        sweep = rsa_auction_sweep(1000, 32, 1000, np.random.default_rng(1111))
        assert len(sweep.outcomes) == 1000
        assert sweep.all_forgeries_doubled
        assert sweep.bob_win_rate == 1.0
        for outcome in sweep.outcomes:
            assert outcome.bob_bid == 2 * outcome.alice_bid
            assert outcome.winner == "bob"

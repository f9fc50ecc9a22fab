from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest

from pmds_lrs.codec import syndrome
from pmds_lrs.linalg import rank
from pmds_lrs.mrcons import MrCode, MrParams, build_code
from pmds_lrs.sumrank import InstanceTooLarge
from pmds_lrs.verify import (
    BoundError,
    ErasurePattern,
    Method,
    ReductionPreconditionError,
    VerificationReport,
    averify_mr,
    count_maximal_patterns,
    direct_failures,
    distance_summary,
    enumerate_maximal_patterns,
    field_size_lower_bound,
    is_recoverable_direct,
    is_recoverable_reduction,
    iter_maximal_erasures,
    local_min_distance,
    min_distance_bruteforce,
    min_distance_witness,
    mutate_global_entry,
    mutation_trial,
    reduction_failures,
    singleton_lrc_bound,
    sweep_instances,
    verify_mr,
    verify_mr_definition,
)

SMALL_PARAMS = [
    (2, 2, 2, 2, 2, 3),
    (2, 2, 1, 2, 1, 3),
    (2, 3, 2, 2, 3, 3),
    (2, 3, 2, 3, 2, 2),
    (2, 3, 3, 2, 2, 2),
    (3, 1, 1, 2, 1, 2),
    (3, 2, 2, 2, 3, 2),
    (5, 1, 2, 2, 2, 2),
]


def _brute_force_maximal(params):
    size = params.parity_rows
    for E in combinations(range(params.n), size):
        per_set = [sum(1 for j in E if j // params.a == i) for i in range(params.m)]
        if all(c >= params.delta - 1 for c in per_set):
            yield E


@pytest.mark.parametrize("args", SMALL_PARAMS)
def test_maximal_pattern_enumeration(args):
    params = MrParams(*args)
    expected = list(_brute_force_maximal(params))
    assert list(iter_maximal_erasures(params)) == expected
    assert count_maximal_patterns(params) == len(expected)


def test_example1_pattern_count(example1):
    assert count_maximal_patterns(example1.params) == 108
    patterns = list(enumerate_maximal_patterns(example1.params))
    assert len(patterns) == 108
    assert patterns[0] == ErasurePattern((0, 1, 2, 3, 6), (3, 1, 1))
    assert {p.per_set for p in patterns} == {(3, 1, 1), (1, 3, 1), (1, 1, 3), (2, 2, 1), (2, 1, 2), (1, 2, 2)}


def test_erasure_pattern():
    params = MrParams(2, 2, 2, 2, 2, 3)
    pattern = ErasurePattern.of([7, 0, 4, 0], params)
    assert pattern.erased == (0, 4, 7)
    assert pattern.per_set == (1, 1, 1)
    assert len(pattern) == 3
    assert pattern.to_json() == {"erased": [0, 4, 7]}
    with pytest.raises(ValueError):
        ErasurePattern.of([9], params)
    with pytest.raises(ValueError):
        ErasurePattern((0, 1), (1,))


@pytest.mark.parametrize("method", ["direct", "reduction"])
def test_example1_is_mr(example1, method):
    report = verify_mr(example1, method)
    assert report.method is Method(method)
    assert report.total_patterns == 108
    assert report.failures == ()
    assert report.is_mr
    assert report.first_failure is None


def test_example1_definition(example1):
    report = verify_mr_definition(example1)
    assert report.method is Method.DEFINITION
    assert report.total_patterns == 108
    assert report.is_mr
    with pytest.raises(InstanceTooLarge):
        verify_mr_definition(example1, max_subset_checks=100)


def test_example1_min_distance(example1):
    d, witness = min_distance_witness(example1)
    assert d == 5 == example1.params.d
    assert np.count_nonzero(witness) == 5
    assert not any(syndrome(example1, witness))
    assert min_distance_bruteforce(example1) == 5
    with pytest.raises(InstanceTooLarge):
        min_distance_bruteforce(example1, max_codewords=1000)


@pytest.mark.parametrize("code", SMALL_PARAMS, indirect=True)
def test_constructed_codes_are_mr(code):
    direct = verify_mr(code, Method.DIRECT)
    reduction = verify_mr(code, Method.REDUCTION)
    assert direct.is_mr
    assert reduction.is_mr
    assert direct.total_patterns == reduction.total_patterns == count_maximal_patterns(code.params)
    assert verify_mr_definition(code).is_mr


@pytest.mark.parametrize(
    "code", [(2, 2, 2, 2, 2, 3), (2, 2, 1, 2, 1, 3), (5, 1, 2, 2, 2, 2), (3, 1, 1, 2, 1, 2)], indirect=True
)
def test_constructed_codes_meet_predicted_distance(code):
    report = verify_mr(code, with_distance=True)
    assert report.min_distance == code.params.d
    summary = distance_summary(code, report)
    assert summary["mr"]
    assert summary["min_distance"] == summary["predicted_distance"]
    assert summary["singleton_lrc_bound"] >= summary["predicted_distance"]


@pytest.mark.parametrize("code", [(2, 2, 2, 2, 2, 3), (2, 3, 2, 3, 2, 2), (2, 3, 3, 2, 2, 2)], indirect=True)
def test_local_min_distance(code):
    for i in range(code.params.m):
        assert local_min_distance(code, i) == code.params.delta


def test_reduction_with_random_pivot_choice(code, rng):
    patterns = list(iter_maximal_erasures(code.params))
    assert all(is_recoverable_reduction(code, E, rng) for E in patterns)


def test_recoverability_edge_cases(code):
    assert is_recoverable_direct(code, [])
    assert is_recoverable_reduction(code, [])
    assert not is_recoverable_direct(code, range(6))
    assert not is_recoverable_reduction(code, [0, 1, 3, 4, 6, 7])
    # subsets of recoverable patterns are recoverable
    assert is_recoverable_direct(code, [0, 1])
    assert is_recoverable_reduction(code, [0, 1])
    with pytest.raises(ValueError):
        is_recoverable_reduction(code, [9])


def test_reduction_precondition():
    code = build_code(MrParams(2, 3, 2, 3, 2, 2))
    with pytest.raises(ReductionPreconditionError):
        is_recoverable_reduction(code, [0, 4, 5])
    assert is_recoverable_reduction(code, [0, 1, 4, 5])


def _zero_global_block(code, i):
    for row in code.global_row_indices():
        for col in code.repair_sets[i]:
            code = code.with_entry(row, col, 0)
    return code


def test_verifiers_agree_on_broken_code(example1):
    broken = _zero_global_block(example1, 0)
    assert broken.alphas is None
    patterns = list(iter_maximal_erasures(broken.params))
    failures = direct_failures(broken, patterns)
    assert (0, 1, 3, 6, 7) in failures
    assert reduction_failures(broken, patterns) == failures
    report = verify_mr(broken, Method.REDUCTION, jobs=2)
    assert not report.is_mr
    assert [f.erased for f in report.failures] == failures
    assert report.first_failure.erased == failures[0]


def test_verifiers_agree_under_mutation(code, rng):
    broken = 0
    for _ in range(25):
        mutated = mutate_global_entry(code, rng)
        assert mutated.alphas is None
        assert (mutated.H.codes != code.H.codes).sum() == 1
        direct = verify_mr(mutated, Method.DIRECT)
        reduction = verify_mr(mutated, Method.REDUCTION)
        assert reduction.failures == direct.failures
        if rank(mutated.H) == mutated.params.parity_rows:
            definition = verify_mr_definition(mutated)
            assert [f.erased for f in definition.failures] == [f.erased for f in direct.failures]
        broken += not direct.is_mr
    assert broken > 0


def test_mutation_trial(code, rng):
    mutated, report = mutation_trial(code, rng)
    assert mutated != code
    assert report.total_patterns == count_maximal_patterns(code.params)


def test_dropping_a_global_row_keeps_mr():
    code = build_code(MrParams(2, 3, 2, 2, 3, 3))
    smaller = code.without_global_row()
    assert smaller.params.h == 2
    assert verify_mr(smaller, Method.DIRECT).is_mr
    assert verify_mr(smaller, Method.REDUCTION).is_mr


@pytest.mark.anyio
@pytest.mark.parametrize("jobs", [1, 3])
async def test_averify_mr(example1, jobs):
    report = await averify_mr(example1, "direct", jobs=jobs)
    assert report.total_patterns == 108
    assert report.is_mr
    with pytest.raises(InstanceTooLarge):
        await averify_mr(example1, max_patterns=100)


def test_report_json(example1):
    report = verify_mr(example1, with_distance=True)
    data = report.to_json()
    assert data == {
        "params": {"p": 2, "e": 2, "r": 2, "delta": 2, "h": 2, "m": 3},
        "method": "direct",
        "total_patterns": 108,
        "failures": [],
        "min_distance": 5,
    }
    assert "elapsed_ms" in report.to_json(timing=True)
    failing = VerificationReport(report.params, Method.DIRECT, 108, (ErasurePattern((0, 1, 3, 6, 7), (2, 1, 2)),))
    assert failing.to_json()["failures"] == [{"erased": [0, 1, 3, 6, 7]}]


@pytest.mark.parametrize(
    "n, k, r, delta, bound",
    [(9, 4, 2, 2, 5), (12, 6, 3, 2, 6), (20, 10, 4, 3, 7), (6, 1, 1, 2, 6)],
)
def test_singleton_lrc_bound(n, k, r, delta, bound):
    assert singleton_lrc_bound(n, k, r, delta) == bound


def test_singleton_lrc_bound_errors():
    with pytest.raises(BoundError):
        singleton_lrc_bound(9, 0, 2, 2)
    with pytest.raises(BoundError):
        singleton_lrc_bound(9, 4, 0, 2)


@pytest.mark.parametrize(
    "args, case_id, expression, epsilon, value",
    [
        ((9, 2, 2, 2, 3), 1, "n*r^0", Fraction(0), 9.0),
        ((100, 4, 4, 3, 3), 1, "n*r^1", Fraction(1), 400.0),
        ((64, 4, 2, 6, 3), 2, "n^(3/2)", Fraction(1, 2), 512.0),
        ((10, 2, 2, 4, 2), 3, "n^1", Fraction(0), 10.0),
        ((8, 2, 2, 5, 2), 0, "n*r^(-1/3)", Fraction(-1, 3), 8 * 2 ** (-1 / 3)),
    ],
)
def test_field_size_lower_bound(args, case_id, expression, epsilon, value):
    bound = field_size_lower_bound(*args)
    assert bound.case_id == case_id
    assert bound.bound_expression == expression
    assert bound.epsilon == epsilon
    assert bound.value == pytest.approx(value)
    assert bound.to_json()["epsilon"] == str(epsilon)


@pytest.mark.parametrize("args", [(9, 2, 2, 1, 3), (9, 2, 2, 2, 1)])
def test_field_size_lower_bound_errors(args):
    with pytest.raises(BoundError):
        field_size_lower_bound(*args)


def test_sweep_instances():
    instances = list(sweep_instances(qs=(4,), deltas=(2,), hs=(1, 2), r_max=2, m_max=3))
    assert [(p.h, p.r, p.m) for p in instances] == [
        (1, 1, 2),
        (1, 1, 3),
        (1, 2, 1),
        (1, 2, 2),
        (1, 2, 3),
        (2, 1, 3),
        (2, 2, 2),
        (2, 2, 3),
    ]
    for params in instances:
        assert verify_mr(build_code(params)).is_mr
    assert list(sweep_instances(qs=(4,), deltas=(2,), hs=(2,), r_max=2, m_max=3, max_patterns=5)) == []


def test_reduction_reads_edited_matrix_of_constructed_code():
    code = build_code(MrParams(2, 2, 2, 2, 2, 3))
    edited = MrCode(code.params, code.tower, _zero_global_block(code, 0).H, code.alphas)
    assert edited.alphas is not None
    patterns = list(iter_maximal_erasures(code.params))
    failures = direct_failures(edited, patterns)
    assert failures
    assert reduction_failures(edited, patterns) == failures
    loaded = MrCode.from_json(edited.to_json())
    assert verify_mr(loaded, Method.REDUCTION).failures == verify_mr(loaded, Method.DIRECT).failures


def test_recoverability_is_monotone(example1, rng):
    broken = _zero_global_block(example1, 0)
    patterns = list(iter_maximal_erasures(broken.params))
    failing = set(direct_failures(broken, patterns))
    assert 0 < len(failing) < len(patterns)
    for _ in range(300):
        E = patterns[int(rng.integers(len(patterns)))]
        if E in failing:
            extra = rng.choice(broken.n, size=int(rng.integers(1, 3)), replace=False).tolist()
            assert not is_recoverable_direct(broken, set(E) | set(extra))
            continue
        subset = [j for j in E if rng.random() < 0.6]
        assert is_recoverable_direct(broken, subset)
        try:
            assert is_recoverable_reduction(broken, subset)
        except ReductionPreconditionError:
            pass


@pytest.mark.slow
def test_most_global_entry_mutations_break_mr(rng):
    code = build_code(MrParams(2, 2, 2, 2, 2, 3))
    broken = 0
    for _ in range(100):
        mutated = mutate_global_entry(code, rng)
        direct = verify_mr(mutated, Method.DIRECT)
        assert verify_mr(mutated, Method.REDUCTION).failures == direct.failures
        broken += not direct.is_mr
    assert broken > 50

import pytest

from curio import program as P
from curio.enumeration import EnumerationConfig, enumerate_programs
from curio.pruning import (DUPLICATE_PREFIX, INPUT_INDEPENDENT, KEPT, TRIVIAL, behavior_trace,
                           behavioral_duplicate_test, parse_verdict_line, prune_input_independent,
                           prune_programs, triviality_test)

SQUARED_NORM = """\
program intrinsic squared_norm
node s1 = input state_next
node w  = weights nn_s_to_f
node p  = nn_apply w s1
node q  = dot_product p p
node m  = minimize q
output q
"""

SELF_SUBTRACT = """\
program intrinsic self_subtract
node s1 = input state_next
node w  = weights nn_s_to_f
node p  = nn_apply w s1
node n  = l2_norm p
node d  = subtract n n
output d
"""


def test_squared_norm_loss_is_trivial():
    report = triviality_test(P.deserialize(SQUARED_NORM))
    assert report.prunable
    assert min(abs(v) for v in report.curves["m"]) < 1e-3


@pytest.mark.parametrize("name", ["rnd", "fast", "inverse_features", "ensemble_disagreement",
                                  "cycle_consistency"])
def test_reference_losses_are_not_trivial(name):
    assert not triviality_test(P.build_reference_program(name)).prunable


def test_program_without_losses_is_not_trivial():
    assert not triviality_test(P.build_reference_program("constant_zero")).prunable


def test_self_subtract_duplicates_constant_zero():
    cfg = EnumerationConfig()
    assert behavioral_duplicate_test(P.deserialize(SELF_SUBTRACT),
                                     P.build_reference_program("constant_zero"), cfg)


def test_fast_and_rnd_never_merge():
    cfg = EnumerationConfig()
    fast, rnd = P.build_reference_program("fast"), P.build_reference_program("rnd")
    assert not behavioral_duplicate_test(fast, rnd, cfg)
    assert behavioral_duplicate_test(fast, fast, cfg)


def test_behavior_trace_is_seeded():
    g = P.build_reference_program("rnd")
    a, b, c = behavior_trace(g, 0), behavior_trace(g, 0), behavior_trace(g, 1)
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != c.tobytes()


def test_input_independent_programs_flagged():
    assert prune_input_independent(P.build_reference_program("gaussian_noise"))
    assert not prune_input_independent(P.build_reference_program("fast"))


def test_prune_programs_verdicts():
    progs = [P.deserialize(SQUARED_NORM), P.deserialize(SELF_SUBTRACT),
             P.build_reference_program("rnd"), P.build_reference_program("fast"),
             P.build_reference_program("constant_one")]
    verdicts = {v.graph.name: v for v in prune_programs(progs)}
    assert verdicts["squared_norm"].verdict == TRIVIAL
    assert verdicts["constant_one"].verdict == INPUT_INDEPENDENT
    assert verdicts["rnd"].verdict == KEPT
    assert verdicts["fast"].verdict == KEPT
    # self_subtract is input-dependent in structure but always 0; with no other
    # constant-0 survivor it stays as its own representative
    assert verdicts["self_subtract"].verdict == KEPT


def test_duplicates_point_to_smallest_key():
    zero_a = P.deserialize(SELF_SUBTRACT)
    zero_b = P.deserialize(SELF_SUBTRACT.replace("l2_norm p", "dot_product p p"))
    out = prune_programs([zero_a, zero_b, P.build_reference_program("rnd")], triviality=False)
    dups = [v for v in out if v.verdict.startswith(DUPLICATE_PREFIX)]
    kept = [v for v in out if v.verdict == KEPT]
    assert len(kept) == 2 and len(dups) == 1
    smallest = min(P.canonical_key(g).hex for g in (zero_a, zero_b))
    assert dups[0].verdict == DUPLICATE_PREFIX + smallest


def test_enumerated_budget_two_pruning_is_deterministic():
    progs = list(enumerate_programs(EnumerationConfig(op_budget=2)))
    a = [v.record() for v in prune_programs(progs)]
    b = [v.record() for v in prune_programs(progs)]
    assert a == b
    for line in a:
        parse_verdict_line(line)


def test_parse_verdict_line_rejects_junk():
    with pytest.raises(ValueError):
        parse_verdict_line("abc\tmaybe")

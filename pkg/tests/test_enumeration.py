import itertools
import os

import pytest

from curio import program as P
from curio import typesys as ts
from curio.enumeration import EnumerationConfig, canonical_form, enumerate_programs

SUBSET = ("nn_s_to_f", "nn_s_to_a", "l2_distance", "action_loss", "dot_product", "minimize")
DETACH_SUBSET = ("nn_s_to_f", "nn_s_to_f_detach", "l2_distance", "subtract", "l2_norm", "minimize")
LIST_SUBSET = ("nn_s_to_f", "minimize", "nn_ensemble_s_to_f", "variable_as_buffer",
               "normal_distribution", "average_distance")


def brute_force(registry, budget):
    """Bottom-up oracle: append one operation at a time to every partial graph,
    try every node as the output, keep what validates in normal form."""
    sigs = [ts.get_operation("curiosity", n) for n in registry]
    start = [P.ProgramNode("s0", "input", (), "state"), P.ProgramNode("s1", "input", (), "state_next"),
             P.ProgramNode("a0", "input", (), "action")]
    start_types = {"s0": ts.S, "s1": ts.S, "a0": ts.A}
    found = set()
    seen_partial = set()

    def emit(nodes):
        for n in nodes:
            if not n.countable:
                continue
            g = P.ProgramGraph(P.INTRINSIC, nodes, n.id)
            if P.validate_program(g, op_budget=budget).canonical:
                found.add(P.canonical_key(g).canonical_string)

    def grow(nodes, types, count):
        anchor = P.ProgramGraph(P.INTRINSIC, nodes, "s0")
        sig_key = P.canonical_order(anchor)[0]
        if sig_key in seen_partial:
            return
        seen_partial.add(sig_key)
        emit(nodes)
        if count == budget:
            return
        values = [n.id for n in nodes if n.op != "weights" and n.id in types]
        for sig in sigs:
            for args in itertools.product(values, repeat=sig.arity):
                binding, diag = ts.unify([types[a] for a in args], sig)
                if diag is not None:
                    continue
                out_t = ts.output_type([types[a] for a in args], sig)
                new_id = f"v{len(nodes)}"
                if sig.is_network:
                    role = "nn_s_to_f" if sig.name == "nn_s_to_f_detach" else sig.name
                    op = "nn_apply_detach" if sig.name == "nn_s_to_f_detach" else "nn_apply"
                    shared = [n.id for n in nodes if n.op == "weights" and n.param == role]
                    for w in shared + [None]:
                        extra = []
                        if w is None:
                            w = f"w{len(nodes)}"
                            extra = [P.ProgramNode(w, "weights", (), role)]
                        node = P.ProgramNode(new_id + "x", op, (w,) + args)
                        grow(nodes + extra + [node], {**types, node.id: out_t}, count + 1)
                else:
                    node = P.ProgramNode(new_id, sig.name, args)
                    t2 = dict(types)
                    if out_t is not None:
                        t2[new_id] = out_t
                    grow(nodes + [node], t2, count + 1)

    grow(start, start_types, 0)
    return found


def _keys(cfg):
    return {P.canonical_key(g).canonical_string for g in enumerate_programs(cfg)}


@pytest.mark.parametrize("budget", [1, 2, 3])
def test_small_budgets_match_oracle(budget):
    assert _keys(EnumerationConfig(op_budget=budget, registry=SUBSET)) == brute_force(SUBSET, budget)


def test_subset_budget_four_matches_oracle():
    ours = _keys(EnumerationConfig(op_budget=4, registry=SUBSET))
    oracle = brute_force(SUBSET, 4)
    assert ours == oracle, (len(ours - oracle), len(oracle - ours))
    assert len(ours) == 182


@pytest.mark.parametrize("subset", [DETACH_SUBSET, LIST_SUBSET], ids=["detach", "lists"])
def test_other_subsets_match_oracle(subset):
    assert _keys(EnumerationConfig(op_budget=4, registry=subset)) == brute_force(subset, 4)


def test_action_and_predict_subset_matches_oracle():
    subset = ("nn_s_to_a", "action_loss", "l2_distance", "predict_f_to_f", "nn_s_to_f", "minimize")
    assert _keys(EnumerationConfig(op_budget=3, registry=subset)) == brute_force(subset, 3)


def test_outputs_are_valid_unique_and_ordered():
    progs = list(enumerate_programs(EnumerationConfig(op_budget=3)))
    keys = [P.canonical_key(g).hex for g in progs]
    assert len(set(keys)) == len(keys)
    counts = [P.countable_ops(g) for g in progs]
    assert counts == sorted(counts)
    for g in progs:
        assert P.validate_program(g).canonical


def test_enumeration_is_deterministic():
    a = [P.serialize(g) for g in enumerate_programs(EnumerationConfig(op_budget=3))]
    b = [P.serialize(g) for g in enumerate_programs(EnumerationConfig(op_budget=3))]
    assert a == b


def test_known_counts_full_registry():
    # frozen after cross-checking small budgets against the oracle
    assert len(list(enumerate_programs(EnumerationConfig(op_budget=1)))) == 4
    assert len(list(enumerate_programs(EnumerationConfig(op_budget=2)))) == 60
    assert len(list(enumerate_programs(EnumerationConfig(op_budget=3)))) == 929


def test_max_programs_truncates():
    assert len(list(enumerate_programs(EnumerationConfig(op_budget=3, max_programs=10)))) == 10


def test_canonical_form_is_stable():
    g = P.build_reference_program("fast")
    c = canonical_form(g)
    assert P.canonical_key(c) == P.canonical_key(g)
    assert P.serialize(canonical_form(c)) == P.serialize(c)


def test_rnd_found_at_budget_four():
    key = P.canonical_key(P.build_reference_program("rnd")).hex
    assert key in {P.canonical_key(g).hex for g in enumerate_programs(EnumerationConfig(op_budget=4, registry=DETACH_SUBSET))}


def test_fast_found_with_its_own_ops():
    ops = ("nn_s_to_a", "action_loss", "l2_distance", "minimize")
    key = P.canonical_key(P.build_reference_program("fast")).hex
    assert key in {P.canonical_key(g).hex for g in enumerate_programs(EnumerationConfig(op_budget=5, registry=ops))}


@pytest.mark.skipif(not os.environ.get("CURIO_SLOW"), reason="set CURIO_SLOW=1 (about 8 minutes)")
def test_fast_found_at_budget_five_full_registry():
    key = P.canonical_key(P.build_reference_program("fast")).hex
    assert any(P.canonical_key(g).hex == key for g in enumerate_programs(EnumerationConfig(op_budget=5)))

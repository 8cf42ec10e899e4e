import os

import pytest
from hypothesis import given, strategies as st

from curio import typesys as T

DATA = os.path.join(os.path.dirname(__file__), "data")

_STATE_TEXT = {
    "none": "-", "running_stat": "R", "adam": "Adam",
}


def _state_text(sig):
    kind = sig.state.kind
    if kind == "network_weights":
        return "5xTheta" if sig.state.detail.startswith("5x") else "Theta"
    if kind in ("fifo_buffer", "nn_buffer"):
        return f"List[{sig.state.detail}]"
    return _STATE_TEXT[kind]


def registry_rows():
    rows = []
    for voc in ("curiosity", "combiner"):
        for sig in T.list_operations(voc):
            if sig.source != "table":
                continue
            row = (voc, sig.table_name, ",".join(map(str, sig.inputs)), _state_text(sig),
                   "-" if sig.output is None else str(sig.output))
            # the combiner constants share one table row
            if rows and rows[-1] == row:
                continue
            rows.append(row)
    return rows


def golden_rows():
    out = []
    with open(os.path.join(DATA, "registry_tables.tsv"), encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            out.append(tuple(line.rstrip("\n").split("\t")))
    return out


def test_registry_matches_golden_tables():
    assert registry_rows() == golden_rows()


def test_registry_sizes():
    assert len([r for r in golden_rows() if r[0] == "curiosity"]) == 31
    assert len([r for r in golden_rows() if r[0] == "combiner"]) == 12


def test_accepts_positive_reals_for_reals():
    assert T.accepts(T.R, T.RP)
    assert not T.accepts(T.RP, T.R)
    assert T.accepts(T.ListOf(T.R), T.ListOf(T.RP))
    assert not T.accepts(T.F, T.A)


def test_typevar_binds_consistently():
    sig = T.get_operation("curiosity", "l2_distance")
    assert T.unify([T.F, T.F], sig)[0] == T.F
    assert T.unify([T.A, T.A], sig)[0] == T.A
    diag = T.check_types([T.F, T.A], sig)
    assert diag is not None and diag.position == 1


def test_typevar_rejects_state_and_reals():
    sig = T.get_operation("curiosity", "l2_norm")
    assert T.check_types([T.S], sig) is not None
    assert T.check_types([T.R], sig) is not None


def test_output_type_substitutes():
    sig = T.get_operation("curiosity", "minus")
    assert T.output_type([T.ListOf(T.A), T.A], sig) == T.ListOf(T.A)
    with pytest.raises(T.TypeSystemError):
        T.output_type([T.F], sig)


def test_unknown_vocabulary_and_op():
    with pytest.raises(T.TypeSystemError):
        T.list_operations("nope")
    with pytest.raises(T.TypeSystemError):
        T.get_operation("combiner", "nn_s_to_f")


def test_no_nested_lists():
    with pytest.raises(T.TypeSystemError):
        T.ListOf(T.ListOf(T.F))


@given(st.sampled_from(["R", "R+", "S", "A", "F", "X"]), st.booleans())
def test_parse_type_round_trip(kind, listed):
    t = T.SemanticType(kind)
    if listed:
        t = T.ListOf(t)
    assert T.parse_type(str(t)) == t


def test_resolve_shapes_image_and_vector():
    img = T.image_binding()
    vec = T.vector_binding(dim=6, actions=4)
    cnn = T.resolve_signature(T.get_operation("curiosity", "nn_s_to_f"), img)
    assert cnn.arch.kind == "cnn" and cnn.output_shape == (32,)
    mlp = T.resolve_signature(T.get_operation("curiosity", "nn_s_to_f"), vec)
    assert mlp.arch.kind == "mlp" and mlp.arch.in_shape == (6,)
    ens = T.resolve_signature(T.get_operation("curiosity", "nn_ensemble_fa_to_f"), vec)
    assert ens.arch.members == 5 and ens.arch.in_shape == (36,)
    al = T.resolve_signature(T.get_operation("curiosity", "action_loss"), vec, T.A)
    assert al.loss_kind == "softmax_nll"
    cont = T.vector_binding(dim=4, actions=2, continuous=True)
    assert T.resolve_signature(T.get_operation("curiosity", "action_loss"), cont, T.A).loss_kind == "padded_mse"


def test_lift_to_list():
    sig = T.resolve_signature(T.get_operation("curiosity", "nn_f_to_a"), T.vector_binding())
    lifted = T.lift_to_list(sig, 0)
    assert lifted.inputs == (T.ListOf(T.F),) and lifted.output == T.ListOf(T.A)
    with pytest.raises(T.TypeSystemError):
        T.lift_to_list(lifted, 0)

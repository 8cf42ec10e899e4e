"""Semantic types, environment bindings and the operation registry.

Types follow the curiosity DSL: reals, positive reals, states, actions,
32-dimensional features and lists of any of those.  ``X`` is a signature-only
type variable that binds to either features or actions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

FEATURE_DIM = 32
ENSEMBLE_SIZE = 5

REAL = "R"
POS_REAL = "R+"
STATE = "S"
ACTION = "A"
FEATURE = "F"
LIST = "List"
TYPEVAR = "X"

_BASE_KINDS = (REAL, POS_REAL, STATE, ACTION, FEATURE, TYPEVAR)


class TypeSystemError(ValueError):
    pass


@dataclass(frozen=True)
class SemanticType:
    kind: str
    inner: Optional["SemanticType"] = None

    def __post_init__(self):
        if self.kind == LIST:
            if self.inner is None:
                raise TypeSystemError("List type needs an element type")
            if self.inner.kind == LIST:
                raise TypeSystemError("lists of lists are not allowed")
        elif self.kind in _BASE_KINDS:
            if self.inner is not None:
                raise TypeSystemError(f"{self.kind} takes no element type")
        else:
            raise TypeSystemError(f"unknown type kind {self.kind!r}")

    @property
    def is_list(self) -> bool:
        return self.kind == LIST

    @property
    def is_scalar(self) -> bool:
        return self.kind in (REAL, POS_REAL)

    def has_typevar(self) -> bool:
        return self.kind == TYPEVAR or (self.inner is not None and self.inner.kind == TYPEVAR)

    def substitute(self, x: "SemanticType") -> "SemanticType":
        if self.kind == TYPEVAR:
            return x
        if self.kind == LIST and self.inner.kind == TYPEVAR:
            return SemanticType(LIST, x)
        return self

    def __str__(self):
        if self.kind == LIST:
            return f"List[{self.inner}]"
        return self.kind


R = SemanticType(REAL)
RP = SemanticType(POS_REAL)
S = SemanticType(STATE)
A = SemanticType(ACTION)
F = SemanticType(FEATURE)
X = SemanticType(TYPEVAR)


def ListOf(inner: SemanticType) -> SemanticType:
    return SemanticType(LIST, inner)


def parse_type(text: str) -> SemanticType:
    text = text.strip()
    if text.startswith("List[") and text.endswith("]"):
        return ListOf(parse_type(text[5:-1]))
    if text not in _BASE_KINDS:
        raise TypeSystemError(f"cannot parse type {text!r}")
    return SemanticType(text)


# ---------------------------------------------------------------------------
# Environment bindings


@dataclass(frozen=True)
class StateForm:
    kind: str  # "image" or "vector"
    shape: tuple

    @classmethod
    def image(cls, channels: int, height: int, width: int) -> "StateForm":
        return cls("image", (channels, height, width))

    @classmethod
    def vector(cls, dim: int) -> "StateForm":
        return cls("vector", (dim,))

    @property
    def size(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n

    def __str__(self):
        return f"{self.kind}({','.join(map(str, self.shape))})"


@dataclass(frozen=True)
class ActionForm:
    kind: str  # "discrete" or "continuous"
    n: int

    @classmethod
    def discrete(cls, n: int) -> "ActionForm":
        return cls("discrete", n)

    @classmethod
    def continuous(cls, dim: int) -> "ActionForm":
        return cls("continuous", dim)

    @property
    def width(self) -> int:
        """Width of the action vector (one-hot width for discrete actions)."""
        return self.n

    def __str__(self):
        return f"{self.kind}({self.n})"


@dataclass(frozen=True)
class EnvTypeBinding:
    state_form: StateForm
    action_form: ActionForm
    feature_dim: int = FEATURE_DIM

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.feature_dim != FEATURE_DIM:
            raise TypeSystemError(f"feature_dim must be {FEATURE_DIM}, got {self.feature_dim}")
        if self.state_form.kind not in ("image", "vector"):
            raise TypeSystemError(f"unknown state form {self.state_form.kind!r}")
        expected = 3 if self.state_form.kind == "image" else 1
        if len(self.state_form.shape) != expected or any(d < 1 for d in self.state_form.shape):
            raise TypeSystemError(f"invalid state shape {self.state_form.shape}")
        if self.action_form.kind == "discrete":
            if self.action_form.n < 2:
                raise TypeSystemError("discrete action spaces need at least 2 actions")
        elif self.action_form.kind == "continuous":
            if self.action_form.n < 1:
                raise TypeSystemError("continuous action spaces need dim >= 1")
        else:
            raise TypeSystemError(f"unknown action form {self.action_form.kind!r}")

    def __str__(self):
        return f"{self.state_form}/{self.action_form}"


def image_binding(channels=4, height=10, width=10, actions=3) -> EnvTypeBinding:
    return EnvTypeBinding(StateForm.image(channels, height, width), ActionForm.discrete(actions))


def vector_binding(dim=4, actions=3, continuous=False) -> EnvTypeBinding:
    act = ActionForm.continuous(actions) if continuous else ActionForm.discrete(actions)
    return EnvTypeBinding(StateForm.vector(dim), act)


# ---------------------------------------------------------------------------
# Operation signatures


@dataclass(frozen=True)
class StateSpec:
    kind: str  # none | fifo_buffer | network_weights | running_stat | nn_buffer | adam
    detail: str = ""

    def __str__(self):
        return self.kind if not self.detail else f"{self.kind}({self.detail})"


NO_STATE = StateSpec("none")


@dataclass(frozen=True)
class OperationSignature:
    name: str
    inputs: tuple
    state: StateSpec
    output: Optional[SemanticType]
    vocabulary: str
    table_name: str
    differentiable: tuple = ()
    is_update_module: bool = False
    commutative: bool = False
    # "table" rows come straight from the DSL tables; "extension" ops are
    # needed by reference programs but absent from the tables.
    source: str = "table"
    searchable: bool = True

    @property
    def arity(self) -> int:
        return len(self.inputs)

    @property
    def is_network(self) -> bool:
        return self.state.kind == "network_weights"

    @property
    def is_loss(self) -> bool:
        return self.name == "minimize" or self.name.startswith("predict_")


def _sig(name, inputs, output, vocabulary, table_name, state=NO_STATE, diff=None,
         update=False, commutative=False, source="table", searchable=True):
    inputs = tuple(inputs)
    if diff is None:
        diff = (True,) * len(inputs)
    return OperationSignature(name=name, inputs=inputs, state=state, output=output,
                              vocabulary=vocabulary, table_name=table_name,
                              differentiable=tuple(diff), is_update_module=update,
                              commutative=commutative, source=source, searchable=searchable)


def _nn(role_in, out, table_name, role, ensemble=False, detach=False, source="table"):
    detail = ("5x" if ensemble else "") + role
    return _sig(f"nn_{role}", role_in, ListOf(out) if ensemble else out, "curiosity",
                table_name, state=StateSpec("network_weights", detail),
                diff=(not detach,) * len(role_in), source=source)


def _build_curiosity():
    c = "curiosity"
    ops = [
        _sig("add", (R, R), R, c, "Add", commutative=True),
        _sig("running_norm", (R,), R, c, "RunningNorm", state=StateSpec("running_stat")),
        _sig("variable_as_buffer", (X,), ListOf(X), c, "VariableAsBuffer",
             state=StateSpec("fifo_buffer", "X"), diff=(False,), update=True),
        _sig("nearest_neighbor_regressor", (F, F), F, c, "NearestNeighborRegressor",
             state=StateSpec("nn_buffer", "F"), diff=(False, False), update=True),
        _sig("subtract_one_tenth", (R,), R, c, "SubtractOneTenth"),
        _sig("normal_distribution", (), R, c, "NormalDistribution"),
        _sig("subtract", (R, R), R, c, "Subtract"),
        _sig("sqrt_abs", (R,), RP, c, "Sqrt(Abs(x))"),
        _nn((F, F), F, "NN F,F->F", "ff_to_f"),
        _nn((F, F), A, "NN F,F->A", "ff_to_a"),
        _nn((F,), A, "NN F->A", "f_to_a"),
        _nn((A,), F, "NN A->F", "a_to_f"),
        _nn((S,), F, "(C)NN", "s_to_f"),
        # shares the S->F weight role; its output never carries gradient
        _sig("nn_s_to_f_detach", (S,), F, c, "(C)NN, Detach",
             state=StateSpec("network_weights", "s_to_f"), diff=(False,)),
        _nn((S,), F, "(C)NNEnsemble", "ensemble_s_to_f", ensemble=True),
        _nn((F,), F, "NN Ensemble F->F", "ensemble_f_to_f", ensemble=True),
        _nn((F, F), F, "NN Ensemble F,F->F", "ensemble_ff_to_f", ensemble=True),
        _nn((F, A), F, "NN Ensemble F,A->F", "ensemble_fa_to_f", ensemble=True),
        _sig("minimize", (R,), None, c, "MinimizeValue", state=StateSpec("adam"), update=True),
        _sig("l2_norm", (X,), RP, c, "L2Norm"),
        _sig("l2_distance", (X, X), R, c, "L2Distance", commutative=True),
        _sig("action_loss", (X, A), RP, c, "ActionSpaceLoss"),
        _sig("dot_product", (X, X), R, c, "DotProduct", commutative=True),
        _sig("add_x", (X, X), X, c, "Add", commutative=True),
        _sig("detach", (X,), X, c, "Detach", diff=(False,)),
        _sig("mean", (ListOf(R),), R, c, "Mean"),
        _sig("variance", (ListOf(X),), RP, c, "Variance"),
        _sig("mean_x", (ListOf(X),), X, c, "Mean"),
        _sig("mapped_l2_norm", (ListOf(X),), ListOf(R), c, "Mapped L2 Norm"),
        _sig("average_distance", (ListOf(X), X), R, c, "Average Distance"),
        _sig("minus", (ListOf(X), X), ListOf(X), c, "Minus"),
        # Extensions: the S->A network used by the action-transition program,
        # target-prediction boxes that add their own regression loss, and
        # the constant baselines.
        _nn((S,), A, "NN S->A", "s_to_a", source="extension"),
        _sig("predict_f_to_f", (F, F), F, c, "PredictTargetFromQuery F->F",
             state=StateSpec("network_weights", "predict_f_to_f"), diff=(True, False),
             update=True, source="extension"),
        _sig("predict_fa_to_f", (F, A, F), F, c, "PredictTargetFromQuery F,A->F",
             state=StateSpec("network_weights", "predict_fa_to_f"), diff=(True, True, False),
             update=True, source="extension"),
        _sig("constant_0", (), R, c, "Constant 0", source="extension", searchable=False),
        _sig("constant_1", (), R, c, "Constant 1", source="extension", searchable=False),
        _sig("constant_minus_1", (), R, c, "Constant -1", source="extension", searchable=False),
    ]
    return tuple(ops)


def _build_combiner():
    c = "combiner"
    consts = [_sig(f"constant_{label}", (), R, c, "Constant {0.01,0.1,0.5,1}")
              for label in ("0_01", "0_1", "0_5", "1")]
    ops = consts + [
        _sig("normal_distribution", (), R, c, "NormalDistribution"),
        _sig("add", (R, R), R, c, "Add", commutative=True),
        _sig("max", (R, R), R, c, "Max", commutative=True),
        _sig("min", (R, R), R, c, "Min", commutative=True),
        _sig("weighted_normalized_sum", (R, R, R, R), R, c, "WeightedNormalizedSum"),
        _sig("running_norm", (R,), R, c, "RunningNorm", state=StateSpec("running_stat")),
        _sig("variable_as_buffer", (R,), ListOf(R), c, "VariableAsBuffer",
             state=StateSpec("fifo_buffer", "R"), diff=(False,), update=True),
        _sig("subtract", (R, R), R, c, "Subtract"),
        _sig("multiply", (R, R), R, c, "Multiply", commutative=True),
        _sig("sqrt_abs", (R,), RP, c, "Sqrt(Abs(x))"),
        _sig("mean", (ListOf(R),), R, c, "Mean"),
    ]
    return tuple(ops)


_REGISTRY = {"curiosity": _build_curiosity(), "combiner": _build_combiner()}
_BY_NAME = {voc: {s.name: s for s in sigs} for voc, sigs in _REGISTRY.items()}

CONSTANT_VALUES = {
    "constant_0": 0.0, "constant_1": 1.0, "constant_minus_1": -1.0,
    "constant_0_01": 0.01, "constant_0_1": 0.1, "constant_0_5": 0.5,
}


def list_operations(vocabulary: str) -> list:
    """Full registry for ``vocabulary`` in a fixed order."""
    try:
        return list(_REGISTRY[vocabulary])
    except KeyError:
        raise TypeSystemError(
            f"unknown vocabulary {vocabulary!r}; expected 'curiosity' or 'combiner'") from None


def get_operation(vocabulary: str, name: str) -> OperationSignature:
    list_operations(vocabulary)
    try:
        return _BY_NAME[vocabulary][name]
    except KeyError:
        raise TypeSystemError(f"unknown {vocabulary} operation {name!r}") from None


def operation_names(vocabulary: str) -> list:
    return [s.name for s in list_operations(vocabulary)]


def network_role(sig: OperationSignature) -> Optional[str]:
    """Weight role a network op draws its parameters from (None otherwise)."""
    if not sig.is_network:
        return None
    detail = sig.state.detail
    return detail[2:] if detail.startswith("5x") else detail


# ---------------------------------------------------------------------------
# Unification


@dataclass(frozen=True)
class TypeDiagnostic:
    position: Optional[int]
    expected: str
    actual: str
    message: str

    def __str__(self):
        return self.message


def accepts(required: SemanticType, actual: SemanticType) -> bool:
    """Subtyping on concrete types: R+ may stand in for R, never the reverse."""
    if required == actual:
        return True
    if required.kind == REAL and actual.kind == POS_REAL:
        return True
    if required.kind == LIST and actual.kind == LIST:
        return accepts(required.inner, actual.inner)
    return False


def unify(node_inputs: Sequence[SemanticType], sig: OperationSignature):
    """Return (binding_for_X or None, diagnostic or None)."""
    if len(node_inputs) != sig.arity:
        return None, TypeDiagnostic(
            None, f"{sig.arity} inputs", f"{len(node_inputs)} inputs",
            f"{sig.name}: arity mismatch, expected {sig.arity} inputs, got {len(node_inputs)}")
    binding = None
    for pos, (want, got) in enumerate(zip(sig.inputs, node_inputs)):
        if want.has_typevar():
            elem = got
            if want.kind == LIST:
                if got.kind != LIST:
                    return None, _mismatch(sig, pos, want, got)
                elem = got.inner
            if elem.kind not in (FEATURE, ACTION):
                return None, _mismatch(sig, pos, want, got)
            if binding is None:
                binding = elem
            elif binding != elem:
                return None, TypeDiagnostic(
                    pos, str(want.substitute(binding)), str(got),
                    f"{sig.name}: input {pos} binds X to {elem} but X is already {binding}")
        elif not accepts(want, got):
            return None, _mismatch(sig, pos, want, got)
    return binding, None


def _mismatch(sig, pos, want, got):
    return TypeDiagnostic(pos, str(want), str(got),
                          f"{sig.name}: input {pos} expected {want}, got {got}")


def check_types(node_inputs: Sequence[SemanticType], sig: OperationSignature) -> Optional[TypeDiagnostic]:
    """None when the inputs fit ``sig``; otherwise the first mismatch."""
    return unify(node_inputs, sig)[1]


def output_type(node_inputs: Sequence[SemanticType], sig: OperationSignature) -> Optional[SemanticType]:
    binding, diag = unify(node_inputs, sig)
    if diag is not None:
        raise TypeSystemError(diag.message)
    if sig.output is None:
        return None
    if sig.output.has_typevar():
        return sig.output.substitute(binding)
    return sig.output


# ---------------------------------------------------------------------------
# Concrete signatures


@dataclass(frozen=True)
class Architecture:
    kind: str  # "mlp", "cnn" or "ensemble"
    in_shape: tuple
    out_dim: int
    hidden: tuple = (64, 64)
    conv_channels: tuple = (16, 32)
    members: int = 1

    def describe(self) -> str:
        if self.kind == "ensemble":
            return f"ensemble{self.members}({self.member().describe()})"
        if self.kind == "cnn":
            return f"cnn{self.in_shape}->{'x'.join(map(str, self.conv_channels))}->{self.out_dim}"
        dims = (self.in_shape[0],) + tuple(self.hidden) + (self.out_dim,)
        return "mlp(" + "->".join(map(str, dims)) + ")"

    def member(self) -> "Architecture":
        if self.kind != "ensemble":
            return self
        kind = "cnn" if len(self.in_shape) == 3 else "mlp"
        return replace(self, kind=kind, members=1)


@dataclass(frozen=True)
class ConcreteSignature:
    name: str
    inputs: tuple          # concrete SemanticTypes
    input_shapes: tuple    # per-element array shapes
    output: Optional[SemanticType]
    output_shape: Optional[tuple]
    arch: Optional[Architecture] = None
    loss_kind: Optional[str] = None
    lifted: tuple = ()

    @property
    def base_name(self) -> str:
        return self.name.split("@")[0]


def shape_of(t: SemanticType, binding: EnvTypeBinding) -> tuple:
    """Per-rollout array shape of a concrete type (lists give the element shape)."""
    if t.kind == LIST:
        return shape_of(t.inner, binding)
    if t.kind in (REAL, POS_REAL):
        return ()
    if t.kind == STATE:
        return tuple(binding.state_form.shape)
    if t.kind == ACTION:
        return (binding.action_form.width,)
    if t.kind == FEATURE:
        return (binding.feature_dim,)
    raise TypeSystemError(f"type {t} is not concrete")


def _arch_for(sig: OperationSignature, binding: EnvTypeBinding, concrete_inputs) -> Architecture:
    out = sig.output
    if sig.name.startswith("predict_"):
        query = concrete_inputs[:-1]
        out_dim = binding.feature_dim
    else:
        query = concrete_inputs
        elem = out.inner if out.kind == LIST else out
        out_dim = shape_of(elem, binding)[0]
    ensemble = sig.state.detail.startswith("5x")
    if len(query) == 1 and query[0].kind == STATE:
        kind = "cnn" if binding.state_form.kind == "image" else "mlp"
        in_shape = tuple(binding.state_form.shape)
    else:
        kind = "mlp"
        in_shape = (sum(shape_of(t, binding)[0] for t in query),)
    if ensemble:
        return Architecture("ensemble", in_shape, out_dim, members=ENSEMBLE_SIZE)
    return Architecture(kind, in_shape, out_dim)


def resolve_signature(sig: OperationSignature, binding: EnvTypeBinding,
                      x: Optional[SemanticType] = None) -> ConcreteSignature:
    """Instantiate S/A/F (and X, when given) against an environment binding."""
    binding.validate()
    if any(t.has_typevar() for t in sig.inputs) and x is None:
        x = F
    if x is not None and x.kind not in (FEATURE, ACTION):
        raise TypeSystemError(f"X must bind to F or A, not {x}")
    inputs = tuple(t.substitute(x) if x is not None else t for t in sig.inputs)
    output = None
    if sig.output is not None:
        output = sig.output.substitute(x) if x is not None else sig.output
    arch = _arch_for(sig, binding, inputs) if sig.is_network else None
    loss_kind = None
    if sig.name == "action_loss":
        loss_kind = "softmax_nll" if binding.action_form.kind == "discrete" else "padded_mse"
    return ConcreteSignature(
        name=sig.name,
        inputs=inputs,
        input_shapes=tuple(shape_of(t, binding) for t in inputs),
        output=output,
        output_shape=None if output is None else shape_of(output, binding),
        arch=arch,
        loss_kind=loss_kind,
    )


def lift_to_list(sig: ConcreteSignature, input_index: int) -> ConcreteSignature:
    """Map ``sig`` elementwise over a list supplied at ``input_index``."""
    if not 0 <= input_index < len(sig.inputs):
        raise TypeSystemError(f"{sig.name} has no input {input_index}")
    if sig.inputs[input_index].is_list:
        raise TypeSystemError(f"{sig.name}: input {input_index} is already a list")
    if sig.output is None or sig.output.is_list:
        raise TypeSystemError(f"{sig.name}: output {sig.output} cannot be lifted")
    inputs = list(sig.inputs)
    inputs[input_index] = ListOf(inputs[input_index])
    return replace(sig, name=f"{sig.name}@{input_index}", inputs=tuple(inputs),
                   output=ListOf(sig.output), lifted=sig.lifted + (input_index,))

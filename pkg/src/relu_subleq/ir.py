"""A small tensor-program IR for constructed ReLU networks.

Programs are straight-line SSA over named integer vectors.  The input
vector is always called ``"x"``.  Step kinds:

``affine_relu``  ``ReLU(W v + b)``, one network layer
``affine``       ``W v + b``
``relu``         ``max(v, 0)``
``gate``         coordinatewise product of a {0,1} gate and a value
``add``          sum of equally sized vectors
``route``        gather from the concatenation of the inputs
``const``        a constant vector
``loop``         run a sub-program (``body.repeat`` iterations) on one input

All arithmetic is exact ``int64``; nothing is ever rounded.  Execution is
batched: a leading axis of any length is carried through every step.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "IRError",
    "ValidationError",
    "ParseError",
    "LoweringError",
    "Step",
    "TensorProgram",
    "ProgramBuilder",
    "ActivationBound",
    "execute",
    "counted_layers",
    "layer_report",
    "bound_activations",
    "lower_gates",
    "export_weights",
    "import_weights",
    "FORMAT_VERSION",
]

FORMAT_VERSION = "relu-subleq-ir/1"

KINDS = ("affine_relu", "affine", "relu", "gate", "add", "route", "const", "loop")
# Steps that never cost a layer and that an affine map may be absorbed through.
_TRANSPARENT = {"gate", "add", "route", "affine"}
_LAYERS = {"affine_relu", "relu"}


class IRError(Exception):
    pass


class ValidationError(IRError):
    pass


class ParseError(IRError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class LoweringError(IRError):
    def __init__(self, message: str, step_index: int, label: str):
        super().__init__(f"step {step_index} ({label or 'unlabelled'}): {message}")
        self.step_index = step_index
        self.label = label


def _ints(a: Any, ndim: int) -> np.ndarray:
    arr = np.asarray(a)
    if arr.dtype.kind not in "iub":
        if arr.size and not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ValidationError("all weights, biases and constants must be integers")
    arr = arr.astype(np.int64)
    if arr.ndim != ndim:
        raise ValidationError(f"expected a {ndim}-D array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Step:
    kind: str
    out: str
    out_size: int
    inputs: tuple[str, ...] = ()
    weight: np.ndarray | None = None
    bias: np.ndarray | None = None
    index: np.ndarray | None = None
    value: np.ndarray | None = None
    body: TensorProgram | None = None
    label: str = ""


@dataclass(frozen=True, eq=False)
class TensorProgram:
    """An immutable, validated program.

    ``repeat`` runs the whole step list that many times, feeding the output
    back as the next input.  ``boundary_bound``, when set, is the contract that
    every coordinate of the input (and of the output after each iteration) has
    magnitude at most that value; activation bounds are derived from it.
    """

    name: str
    input_size: int
    output: str
    steps: tuple[Step, ...]
    repeat: int = 1
    boundary_bound: int | None = None
    declared_layers: int | None = None
    sizes: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sizes", _validate(self))

    @property
    def output_size(self) -> int:
        return self.sizes[self.output]

    def to_dict(self) -> dict:
        return _program_to_dict(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TensorProgram):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(export_weights(self))


def _validate(p: TensorProgram) -> dict[str, int]:
    if p.input_size < 0:
        raise ValidationError(f"{p.name}: negative input size")
    if p.repeat < 1:
        raise ValidationError(f"{p.name}: repeat must be >= 1, got {p.repeat}")
    sizes: dict[str, int] = {"x": p.input_size}
    for i, s in enumerate(p.steps):
        where = f"{p.name} step {i} ({s.label or s.kind})"
        if s.kind not in KINDS:
            raise ValidationError(f"{where}: unknown kind {s.kind!r}")
        if s.out in sizes:
            raise ValidationError(f"{where}: name {s.out!r} assigned twice")
        for name in s.inputs:
            if name not in sizes:
                raise ValidationError(f"{where}: input {name!r} is not defined yet")
        ins = [sizes[n] for n in s.inputs]
        if s.kind in ("affine_relu", "affine"):
            if len(ins) != 1 or s.weight is None or s.bias is None:
                raise ValidationError(f"{where}: needs one input, a weight and a bias")
            rows, cols = s.weight.shape
            if cols != ins[0]:
                raise ValidationError(f"{where}: weight has {cols} columns, input has {ins[0]}")
            if rows != s.out_size or s.bias.shape != (s.out_size,):
                raise ValidationError(
                    f"{where}: weight shape {s.weight.shape} and bias length "
                    f"{s.bias.shape[0]} disagree with declared output {s.out_size}"
                )
        elif s.kind == "relu":
            if ins != [s.out_size]:
                raise ValidationError(f"{where}: relu needs one input of size {s.out_size}")
        elif s.kind in ("gate", "add"):
            need = 2 if s.kind == "gate" else None
            if (need and len(ins) != need) or not ins or any(n != s.out_size for n in ins):
                raise ValidationError(f"{where}: operands must all have size {s.out_size}")
        elif s.kind == "route":
            if s.index is None or s.index.shape != (s.out_size,):
                raise ValidationError(f"{where}: route index must have length {s.out_size}")
            total = sum(ins)
            if s.out_size and (s.index.min() < 0 or s.index.max() >= total):
                raise ValidationError(f"{where}: route index out of range for {total} inputs")
        elif s.kind == "const":
            if ins or s.value is None or s.value.shape != (s.out_size,):
                raise ValidationError(f"{where}: const needs a value of length {s.out_size}")
        elif s.kind == "loop":
            b = s.body
            if b is None or len(ins) != 1:
                raise ValidationError(f"{where}: loop needs one input and a body")
            if b.input_size != ins[0] or b.output_size != ins[0] or s.out_size != ins[0]:
                raise ValidationError(f"{where}: loop body must map size {ins[0]} to itself")
        sizes[s.out] = s.out_size
    if p.output not in sizes:
        raise ValidationError(f"{p.name}: output {p.output!r} is never assigned")
    if p.repeat > 1 and sizes[p.output] != p.input_size:
        raise ValidationError(f"{p.name}: a repeated program must map its input size to itself")
    return sizes


class ProgramBuilder:
    """Incrementally assemble a :class:`TensorProgram`.

    Every method returns the name of the vector it defines.
    """

    def __init__(self, name: str, input_size: int, *, repeat: int = 1,
                 boundary_bound: int | None = None):
        self.name = name
        self.input_size = input_size
        self.repeat = repeat
        self.boundary_bound = boundary_bound
        self._steps: list[Step] = []
        self._sizes: dict[str, int] = {"x": input_size}
        self._counter = 0

    def size(self, name: str) -> int:
        return self._sizes[name]

    def _emit(self, kind: str, label: str, out_size: int, inputs: Sequence[str] = (), **kw) -> str:
        self._counter += 1
        out = f"{label or kind}#{self._counter}"
        step = Step(kind=kind, out=out, out_size=int(out_size), inputs=tuple(inputs), label=label, **kw)
        self._steps.append(step)
        self._sizes[out] = int(out_size)
        return out

    def affine_relu(self, src: str, weight, bias=None, label: str = "") -> str:
        w = _ints(weight, 2)
        b = _ints(np.zeros(w.shape[0]) if bias is None else bias, 1)
        return self._emit("affine_relu", label, w.shape[0], [src], weight=w, bias=b)

    def affine(self, src: str, weight, bias=None, label: str = "") -> str:
        w = _ints(weight, 2)
        b = _ints(np.zeros(w.shape[0]) if bias is None else bias, 1)
        return self._emit("affine", label, w.shape[0], [src], weight=w, bias=b)

    def relu(self, src: str, label: str = "") -> str:
        return self._emit("relu", label, self._sizes[src], [src])

    def gate(self, gate: str, value: str, label: str = "") -> str:
        return self._emit("gate", label, self._sizes[value], [gate, value])

    def add(self, *srcs: str, label: str = "") -> str:
        return self._emit("add", label, self._sizes[srcs[0]], srcs)

    def route(self, srcs: Sequence[str] | str, index, label: str = "") -> str:
        if isinstance(srcs, str):
            srcs = [srcs]
        idx = _ints(index, 1)
        return self._emit("route", label, idx.shape[0], srcs, index=idx)

    def const(self, value, label: str = "") -> str:
        v = _ints(value, 1)
        return self._emit("const", label, v.shape[0], value=v)

    def loop(self, src: str, body: TensorProgram, label: str = "") -> str:
        return self._emit("loop", label or body.name, self._sizes[src], [src], body=body)

    def build(self, output: str, declared_layers: int | None = None) -> TensorProgram:
        return TensorProgram(
            name=self.name,
            input_size=self.input_size,
            output=output,
            steps=tuple(self._steps),
            repeat=self.repeat,
            boundary_bound=self.boundary_bound,
            declared_layers=declared_layers,
        )


# --------------------------------------------------------------------------- execution

def execute(p: TensorProgram, x) -> np.ndarray:
    """Run ``p`` on one input vector or on a batch (rows are samples)."""
    arr = np.asarray(x, dtype=np.int64)
    single = arr.ndim == 1
    batch = arr[None, :] if single else arr
    if batch.ndim != 2 or batch.shape[1] != p.input_size:
        raise ValidationError(f"{p.name}: expected input of length {p.input_size}, got shape {arr.shape}")
    out = _run(p, batch)
    return out[0] if single else out


def _run(p: TensorProgram, x: np.ndarray) -> np.ndarray:
    cur = x
    for _ in range(p.repeat):
        env = {"x": cur}
        for s in p.steps:
            env[s.out] = _apply(s, env, cur.shape[0])
        cur = env[p.output]
    return cur


def _apply(s: Step, env: dict, n: int) -> np.ndarray:
    k = s.kind
    if k == "affine_relu":
        return np.maximum(env[s.inputs[0]] @ s.weight.T + s.bias, 0)
    if k == "affine":
        return env[s.inputs[0]] @ s.weight.T + s.bias
    if k == "relu":
        return np.maximum(env[s.inputs[0]], 0)
    if k == "gate":
        return env[s.inputs[0]] * env[s.inputs[1]]
    if k == "add":
        total = env[s.inputs[0]].copy()
        for name in s.inputs[1:]:
            total += env[name]
        return total
    if k == "route":
        if len(s.inputs) == 1:
            return env[s.inputs[0]][:, s.index]
        return np.concatenate([env[i] for i in s.inputs], axis=1)[:, s.index]
    if k == "const":
        return np.broadcast_to(s.value, (n, s.out_size))
    if k == "loop":
        return _run(s.body, env[s.inputs[0]])
    raise IRError(f"unknown step kind {k!r}")  # unreachable after validation


# --------------------------------------------------------------------------- layer accounting

def _step_costs(p: TensorProgram) -> list[int]:
    producer = {s.out: s for s in p.steps}
    consumers: dict[str, list[Step]] = {}
    for s in p.steps:
        for name in s.inputs:
            consumers.setdefault(name, []).append(s)

    def reaches_layer_upstream(s: Step, seen: set) -> bool:
        for name in s.inputs:
            q = producer.get(name)
            if q is None or id(q) in seen:
                continue
            seen.add(id(q))
            if q.kind in _LAYERS or (q.kind in _TRANSPARENT and reaches_layer_upstream(q, seen)):
                return True
        return False

    def reaches_layer_downstream(s: Step, seen: set) -> bool:
        for q in consumers.get(s.out, ()):
            if id(q) in seen:
                continue
            seen.add(id(q))
            if q.kind in _LAYERS or (q.kind in _TRANSPARENT and reaches_layer_downstream(q, seen)):
                return True
        return False

    costs = []
    for s in p.steps:
        if s.kind == "affine_relu":
            costs.append(1)
        elif s.kind == "relu":
            q = producer.get(s.inputs[0])
            # fused with a preceding affine map, which carries the cost instead
            costs.append(0 if q is not None and q.kind == "affine" else 1)
        elif s.kind == "affine":
            fused = any(q.kind == "relu" for q in consumers.get(s.out, ()))
            if fused:
                costs.append(1)
            elif reaches_layer_upstream(s, set()) or reaches_layer_downstream(s, set()):
                costs.append(0)
            else:
                costs.append(1)
        elif s.kind == "loop":
            costs.append(counted_layers(s.body))
        else:
            costs.append(0)
    return costs


def counted_layers(p: TensorProgram) -> int:
    """Number of ReLU-MLP layers under the accounting convention.

    Each ``affine_relu`` is one layer.  An ``affine`` map next to a layer (through
    routing, addition and gating) is absorbed into it; otherwise it is a layer
    of its own.  A ``relu`` directly after an ``affine`` fuses with it.  Gates,
    additions, routing and constants are free.  A looped body counts once,
    however many times it runs.
    """
    return sum(_step_costs(p))


def layer_report(p: TensorProgram) -> list[tuple[str, int]]:
    """``(label, counted layers)`` per top-level step that costs at least one layer."""
    return [(s.label or s.kind, c) for s, c in zip(p.steps, _step_costs(p)) if c]


# --------------------------------------------------------------------------- activation bounds

@dataclass
class ActivationBound:
    """Sound interval bounds for every wire of a program.

    ``wires`` maps wire names (loop bodies prefixed ``"<loop>/"``) to
    ``(lo, hi)`` arrays; ``pre_activation`` holds the interval of ``W v + b``
    before each ReLU.  ``bound`` is the largest magnitude anywhere.
    """

    wires: dict[str, tuple[np.ndarray, np.ndarray]]
    pre_activation: dict[str, tuple[np.ndarray, np.ndarray]]
    bound: int
    output_bound: int


def _affine_interval(w: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    wp = np.maximum(w, 0)
    wn = np.minimum(w, 0)
    return wp @ lo + wn @ hi + b, wp @ hi + wn @ lo + b


def _interval_step(s: Step, iv: dict) -> tuple[tuple[np.ndarray, np.ndarray], tuple | None]:
    k = s.kind
    if k in ("affine_relu", "affine"):
        lo, hi = _affine_interval(s.weight, s.bias, *iv[s.inputs[0]])
        if k == "affine":
            return (lo, hi), None
        return (np.maximum(lo, 0), np.maximum(hi, 0)), (lo, hi)
    if k == "relu":
        lo, hi = iv[s.inputs[0]]
        return (np.maximum(lo, 0), np.maximum(hi, 0)), None
    if k == "gate":
        (a0, a1), (b0, b1) = iv[s.inputs[0]], iv[s.inputs[1]]
        corners = np.stack([a0 * b0, a0 * b1, a1 * b0, a1 * b1])
        return (corners.min(axis=0), corners.max(axis=0)), None
    if k == "add":
        lo = sum(iv[n][0] for n in s.inputs)
        hi = sum(iv[n][1] for n in s.inputs)
        return (lo, hi), None
    if k == "route":
        lo = np.concatenate([iv[n][0] for n in s.inputs])[s.index]
        hi = np.concatenate([iv[n][1] for n in s.inputs])[s.index]
        return (lo, hi), None
    if k == "const":
        return (s.value.copy(), s.value.copy()), None
    raise IRError(f"no interval rule for {k!r}")


def _analyse(p: TensorProgram, lo: np.ndarray, hi: np.ndarray, prefix: str,
             wires: dict, pre: dict) -> tuple[np.ndarray, np.ndarray]:
    if p.boundary_bound is not None:
        bb = p.boundary_bound
        lo = np.full(p.input_size, -bb, dtype=np.int64)
        hi = np.full(p.input_size, bb, dtype=np.int64)
    for it in range(p.repeat):
        iv = {"x": (lo, hi)}
        for s in p.steps:
            if s.kind == "loop":
                out = _analyse(s.body, *iv[s.inputs[0]], f"{prefix}{s.out}/", wires, pre)
            else:
                out, pre_iv = _interval_step(s, iv)
                if pre_iv is not None:
                    key = prefix + s.out
                    if key in pre:
                        pre_iv = (np.minimum(pre[key][0], pre_iv[0]), np.maximum(pre[key][1], pre_iv[1]))
                    pre[key] = pre_iv
            iv[s.out] = out
            key = prefix + s.out
            if key in wires:
                out = (np.minimum(wires[key][0], out[0]), np.maximum(wires[key][1], out[1]))
            wires[key] = out
        new_lo, new_hi = iv[p.output]
        if p.boundary_bound is not None:
            # the contract caps every iteration boundary
            return (np.full(new_lo.shape, -p.boundary_bound, dtype=np.int64),
                    np.full(new_hi.shape, p.boundary_bound, dtype=np.int64))
        if it + 1 < p.repeat:
            nlo, nhi = np.minimum(lo, new_lo), np.maximum(hi, new_hi)
            if np.array_equal(nlo, lo) and np.array_equal(nhi, hi):
                return new_lo, new_hi
            lo, hi = nlo, nhi
        else:
            lo, hi = new_lo, new_hi
    return lo, hi


def _magnitude(ivs: Iterable[tuple[np.ndarray, np.ndarray]]) -> int:
    m = 0
    for lo, hi in ivs:
        if lo.size:
            m = max(m, int(np.abs(lo).max()), int(np.abs(hi).max()))
    return m


SIGNS_LIMIT = 16


def _merge(d: dict, key: str, lo: np.ndarray, hi: np.ndarray) -> None:
    if key in d:
        lo, hi = np.minimum(d[key][0], lo), np.maximum(d[key][1], hi)
    d[key] = (lo, hi)


def _observe(p: TensorProgram, x: np.ndarray, prefix: str, wires: dict, pre: dict) -> np.ndarray:
    cur = x
    for _ in range(p.repeat):
        env = {"x": cur}
        for s in p.steps:
            if s.kind == "loop":
                val = _observe(s.body, env[s.inputs[0]], f"{prefix}{s.out}/", wires, pre)
            else:
                if s.kind == "affine_relu":
                    z = env[s.inputs[0]] @ s.weight.T + s.bias
                    _merge(pre, prefix + s.out, z.min(axis=0), z.max(axis=0))
                val = _apply(s, env, cur.shape[0])
            env[s.out] = val
            _merge(wires, prefix + s.out, val.min(axis=0), val.max(axis=0))
        cur = env[p.output]
    return cur


def bound_activations(p: TensorProgram, input_bound: int = 1, domain: str = "box") -> ActivationBound:
    """Bound every wire of ``p`` given inputs of magnitude ``input_bound``.

    ``domain="box"`` propagates intervals over ``[-input_bound, input_bound]``;
    loop bodies that declare ``boundary_bound`` restart from that bound at
    every iteration boundary.  ``domain="signs"`` executes every input in
    ``{-input_bound, +input_bound}^n`` (``n <= 16``) and reports the exact
    extremes, which is what the circuits see on +/-1 states.
    """
    if domain == "signs":
        n = p.input_size
        if n > SIGNS_LIMIT:
            raise ValueError(f"{p.name}: {n} inputs is too many to enumerate (limit {SIGNS_LIMIT})")
        grid = np.array(list(product((-input_bound, input_bound), repeat=n)), dtype=np.int64).reshape(-1, n)
        wires: dict = {"x": (grid.min(axis=0), grid.max(axis=0))}
        pre: dict = {}
        out = _observe(p, grid, "", wires, pre)
        bound = max(_magnitude(wires.values()), _magnitude(pre.values()))
        return ActivationBound(wires=wires, pre_activation=pre, bound=bound,
                               output_bound=_magnitude([(out.min(axis=0), out.max(axis=0))]))
    if domain != "box":
        raise ValueError(f"domain must be 'box' or 'signs', got {domain!r}")
    lo = np.full(p.input_size, -input_bound, dtype=np.int64)
    hi = np.full(p.input_size, input_bound, dtype=np.int64)
    wires: dict = {"x": (lo, hi)}
    pre: dict = {}
    out_lo, out_hi = _analyse(p, lo, hi, "", wires, pre)
    bound = max(_magnitude(wires.values()), _magnitude(pre.values()))
    return ActivationBound(wires=wires, pre_activation=pre, bound=bound,
                           output_bound=_magnitude([(out_lo, out_hi)]))


# --------------------------------------------------------------------------- gate lowering

def lower_gates(p: TensorProgram, input_bound: int = 1) -> TensorProgram:
    """Replace every gate ``g * v`` with pure affine+ReLU steps.

    With ``g`` in {0, 1} and ``|v| <= B``::

        g * v = ReLU(v + B (g - 1)) - ReLU(-v + B (g - 1))

    which costs one ``affine_relu`` of doubled width plus an absorbed affine
    combine.  ``B`` comes from :func:`bound_activations`.
    """
    lo = np.full(p.input_size, -input_bound, dtype=np.int64)
    hi = np.full(p.input_size, input_bound, dtype=np.int64)
    return _lower(p, lo, hi)


def _lower(p: TensorProgram, lo: np.ndarray, hi: np.ndarray) -> TensorProgram:
    if p.boundary_bound is not None:
        lo = np.full(p.input_size, -p.boundary_bound, dtype=np.int64)
        hi = np.full(p.input_size, p.boundary_bound, dtype=np.int64)
    elif p.repeat > 1:
        wires: dict = {}
        lo, hi = _analyse(p, lo, hi, "", wires, {})
        lo, hi = np.minimum(lo, wires["x"][0]), np.maximum(hi, wires["x"][1])

    steps: list[Step] = []
    iv = {"x": (lo, hi)}
    for i, s in enumerate(p.steps):
        if s.kind == "loop":
            body = _lower(s.body, *iv[s.inputs[0]])
            steps.append(Step(kind="loop", out=s.out, out_size=s.out_size, inputs=s.inputs,
                              body=body, label=s.label))
            iv[s.out] = _analyse(s.body, *iv[s.inputs[0]], "", {}, {})
            continue
        iv[s.out] = _interval_step(s, iv)[0]
        if s.kind != "gate":
            steps.append(s)
            continue
        g_name, v_name = s.inputs
        g_lo, g_hi = iv[g_name]
        if g_lo.size and (g_lo.min() < 0 or g_hi.max() > 1):
            v_lo, v_hi = iv[v_name]
            if v_lo.size and v_lo.min() >= 0 and v_hi.max() <= 1:
                g_name, v_name = v_name, g_name
            else:
                raise LoweringError(
                    f"cannot prove either operand of gate {s.out!r} lies in {{0, 1}}", i, s.label)
        v_lo, v_hi = iv[v_name]
        B = _magnitude([(v_lo, v_hi)])
        n = s.out_size
        eye = np.eye(n, dtype=np.int64)
        cat = Step(kind="route", out=s.out + "/cat", out_size=2 * n, inputs=(g_name, v_name),
                   index=_ints(np.arange(2 * n), 1), label=s.label + ".lower.cat")
        w = np.block([[B * eye, eye], [B * eye, -eye]])
        hid = Step(kind="affine_relu", out=s.out + "/hid", out_size=2 * n, inputs=(cat.out,),
                   weight=_ints(w, 2), bias=_ints(np.full(2 * n, -B), 1),
                   label=s.label + ".lower.relu")
        comb = Step(kind="affine", out=s.out, out_size=n, inputs=(hid.out,),
                    weight=_ints(np.hstack([eye, -eye]), 2), bias=_ints(np.zeros(n), 1),
                    label=s.label + ".lower.combine")
        steps.extend([cat, hid, comb])
    return TensorProgram(name=p.name + "+lowered" if "+lowered" not in p.name else p.name,
                         input_size=p.input_size, output=p.output, steps=tuple(steps),
                         repeat=p.repeat, boundary_bound=p.boundary_bound,
                         declared_layers=p.declared_layers)


def count_gates(p: TensorProgram) -> int:
    """Gates in the layer-counted structure (loop bodies once)."""
    return sum(count_gates(s.body) if s.kind == "loop" else int(s.kind == "gate") for s in p.steps)


# --------------------------------------------------------------------------- serialization

def _step_to_dict(i: int, s: Step) -> dict:
    d: dict[str, Any] = {
        "index": i,
        "kind": s.kind,
        "label": s.label,
        "out": s.out,
        "out_size": s.out_size,
        "inputs": list(s.inputs),
    }
    if s.weight is not None:
        d["shape"] = list(s.weight.shape)
        d["W"] = s.weight.ravel().tolist()
        d["b"] = s.bias.tolist()
    if s.index is not None:
        d["index_map"] = s.index.tolist()
    if s.value is not None:
        d["value"] = s.value.tolist()
    if s.body is not None:
        d["body"] = _program_to_dict(s.body)
    return d


def _program_to_dict(p: TensorProgram) -> dict:
    return {
        "name": p.name,
        "input_size": p.input_size,
        "output": p.output,
        "output_size": p.output_size,
        "loop_spec": {"repeat": p.repeat, "boundary_bound": p.boundary_bound},
        "declared_layers": p.declared_layers,
        "counted_layers": counted_layers(p),
        "steps": [_step_to_dict(i, s) for i, s in enumerate(p.steps)],
    }


def export_weights(p: TensorProgram) -> bytes:
    """Canonical UTF-8 JSON document: sorted keys, no insignificant whitespace, LF."""
    doc = {"format": FORMAT_VERSION, "program": _program_to_dict(p)}
    return (json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n").encode()


def _require(d: dict, key: str, typ, where: str):
    if not isinstance(d, dict) or key not in d:
        raise ValidationError(f"{where}: missing field {key!r}")
    val = d[key]
    if typ is not None and not isinstance(val, typ):
        raise ValidationError(f"{where}: field {key!r} has the wrong type")
    return val


def _program_from_dict(d: dict, where: str = "program") -> TensorProgram:
    steps = []
    for i, sd in enumerate(_require(d, "steps", list, where)):
        sw = f"{where} step {i}"
        if _require(sd, "index", int, sw) != i:
            raise ValidationError(f"{sw}: index field says {sd['index']}")
        kind = _require(sd, "kind", str, sw)
        kw: dict[str, Any] = {}
        if "W" in sd:
            shape = _require(sd, "shape", list, sw)
            flat = _require(sd, "W", list, sw)
            if len(shape) != 2 or shape[0] * shape[1] != len(flat):
                raise ValidationError(f"{sw}: W has {len(flat)} entries, shape says {shape}")
            kw["weight"] = _ints(np.array(flat, dtype=np.int64).reshape(shape), 2)
            kw["bias"] = _ints(np.array(_require(sd, "b", list, sw), dtype=np.int64), 1)
        if "index_map" in sd:
            kw["index"] = _ints(np.array(sd["index_map"], dtype=np.int64), 1)
        if "value" in sd:
            kw["value"] = _ints(np.array(sd["value"], dtype=np.int64), 1)
        if "body" in sd:
            kw["body"] = _program_from_dict(sd["body"], f"{sw} body")
        steps.append(Step(kind=kind, out=_require(sd, "out", str, sw),
                          out_size=_require(sd, "out_size", int, sw),
                          inputs=tuple(_require(sd, "inputs", list, sw)),
                          label=_require(sd, "label", str, sw), **kw))
    loop = _require(d, "loop_spec", dict, where)
    p = TensorProgram(
        name=_require(d, "name", str, where),
        input_size=_require(d, "input_size", int, where),
        output=_require(d, "output", str, where),
        steps=tuple(steps),
        repeat=_require(loop, "repeat", int, where + " loop_spec"),
        boundary_bound=loop.get("boundary_bound"),
        declared_layers=d.get("declared_layers"),
    )
    if p.output_size != _require(d, "output_size", int, where):
        raise ValidationError(f"{where}: declared output size {d['output_size']} != {p.output_size}")
    if counted_layers(p) != _require(d, "counted_layers", int, where):
        raise ValidationError(f"{where}: declared counted_layers {d['counted_layers']} != {counted_layers(p)}")
    return p


def import_weights(data: bytes | str) -> TensorProgram:
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("invalid UTF-8", exc.start) from None
    else:
        text = data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, len(text[: exc.pos].encode())) from None
    if _require(doc, "format", str, "document") != FORMAT_VERSION:
        raise ValidationError(f"unsupported format {doc['format']!r}")
    try:
        return _program_from_dict(_require(doc, "program", dict, "document"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, IRError):
            raise
        raise ValidationError(str(exc)) from None

"""JSON (de)serialization for diagrams, channels, graphs and streams.

Schema summary:

- diagram: ``{"seq": [...]}``, ``{"par": [...]}`` or
  ``{"gen": {"kind": "...", ...params}}``; phases are
  ``{"pi_num": int, "pi_den": int}`` or ``{"rad": float}``; complex
  numbers are ``[re, im]``.  ``parse(serialize(d)) == d``.
- channel: diagram JSON plus ``{"vars": [...], "annotations": [...]}``
  with expressions in prefix-list notation, e.g. ``["xor","y1","y2"]``.
- labelled open graph / fusion network: ``{"vertices":[...],
  "edges":[[u,v],...], "inputs":[...], "outputs":[...],
  "labels":{v:{"plane":...,"alpha":...,"c":...}}}``; fusion networks
  add ``{"fusions":[{"pair":[u,v],"plane":...,"alpha":...}]}``.
- stream: ``{"memory": ..., "prefix": [channel...], "cycle": [...]}``.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Any, Dict, List, Optional

from . import exprs
from .channel import Annotation, ChannelDiagram
from .diagram import Diagram, Leaf, Par, Seq
from .errors import ParseError
from .flow import Fusion, FusionNetwork, LabelledOpenGraph
from .generators import (
    BeamSplitter,
    CtrlModeSwap,
    CtrlPhaseFlip,
    CtrlSwap,
    CtrlX,
    CtrlZ,
    Discard,
    DRMerge,
    DRSplit,
    EndoPhase,
    FusionCmd,
    Generator,
    Hadamard,
    Id,
    KrausMap,
    PhaseShift,
    PhotonDetect,
    PhotonPrep,
    QubitMeasure,
    QubitPrep,
    Scalar,
    Swap,
    Triangle,
    WDagger,
    WNode,
    XSpider,
    ZSpider,
    _freeze_matrix,
)
from .streams import ObjectSeq, StreamSpec
from .wires import Phase, WireKind

__all__ = [
    "diagram_to_json",
    "diagram_from_json",
    "channel_to_json",
    "channel_from_json",
    "graph_to_json",
    "graph_from_json",
    "network_to_json",
    "network_from_json",
    "stream_to_json",
    "stream_from_json",
]


# ---------------------------------------------------------------------------
# scalar helpers
# ---------------------------------------------------------------------------


def _phase_to_json(p: Phase) -> Dict[str, Any]:
    if p.exact is not None:
        return {"pi_num": p.exact.numerator, "pi_den": p.exact.denominator}
    return {"rad": p.approx}


def _phase_from_json(v: Any) -> Phase:
    if not isinstance(v, dict):
        raise ParseError(f"bad phase {v!r}")
    if "pi_num" in v:
        return Phase.of_pi(int(v["pi_num"]), int(v.get("pi_den", 1)))
    if "rad" in v:
        return Phase.of_float(float(v["rad"]))
    raise ParseError(f"bad phase {v!r}")


def _complex_to_json(c: complex) -> List[float]:
    c = complex(c)
    return [c.real, c.imag]


def _complex_from_json(v: Any) -> complex:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ParseError(f"bad complex {v!r}")
    return complex(float(v[0]), float(v[1]))


def _kind_to_json(k: WireKind) -> str:
    return k.value


def _kind_from_json(v: Any) -> WireKind:
    for k in WireKind:
        if k.value == v:
            return k
    raise ParseError(f"bad wire kind {v!r}")


def _outcome_to_json(o):
    return o


def _outcome_from_json(v):
    if isinstance(v, bool) or not isinstance(v, (int, str)):
        raise ParseError(f"bad outcome {v!r}")
    return v


def _expr_to_json(e: exprs.Expr):
    return exprs.to_json(e)


def _expr_from_json(v) -> exprs.Expr:
    try:
        return exprs.from_json(v)
    except ValueError as err:
        raise ParseError(str(err)) from err


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def _gen_to_json(g: Generator) -> Dict[str, Any]:
    if isinstance(g, ZSpider):
        return {
            "kind": "zspider",
            "m_in": g.m_in,
            "n_out": g.n_out,
            "phase": _phase_to_json(g.phase),
        }
    if isinstance(g, XSpider):
        return {
            "kind": "xspider",
            "m_in": g.m_in,
            "n_out": g.n_out,
            "phase": _phase_to_json(g.phase),
        }
    if isinstance(g, Hadamard):
        return {"kind": "hadamard"}
    if isinstance(g, Scalar):
        return {"kind": "scalar", "value": _complex_to_json(g.value)}
    if isinstance(g, BeamSplitter):
        return {"kind": "beamsplitter"}
    if isinstance(g, PhaseShift):
        return {"kind": "phaseshift", "phase": _phase_to_json(g.phase)}
    if isinstance(g, PhotonPrep):
        out: Dict[str, Any] = {"kind": "photonprep", "n": _expr_to_json(g.n)}
        if g.values is not None:
            out["values"] = list(g.values)
        return out
    if isinstance(g, PhotonDetect):
        return {"kind": "photondetect", "outcome": _outcome_to_json(g.outcome)}
    if isinstance(g, WNode):
        return {"kind": "wnode"}
    if isinstance(g, WDagger):
        return {"kind": "wdagger"}
    if isinstance(g, EndoPhase):
        return {"kind": "endophase", "c": _complex_to_json(g.c)}
    if isinstance(g, Triangle):
        return {"kind": "triangle"}
    if isinstance(g, DRSplit):
        return {"kind": "drsplit"}
    if isinstance(g, DRMerge):
        return {"kind": "drmerge"}
    if isinstance(g, Swap):
        return {
            "kind": "swap",
            "a": _kind_to_json(g.kind_a),
            "b": _kind_to_json(g.kind_b),
        }
    if isinstance(g, Id):
        return {"kind": "id", "wire": _kind_to_json(g.kind)}
    if isinstance(g, Discard):
        return {"kind": "discard", "wire": _kind_to_json(g.kind)}
    if isinstance(g, QubitPrep):
        out = {"kind": "qubitprep"}
        if isinstance(g.state, str):
            out["state"] = g.state
        else:
            out["state"] = [_complex_to_json(a) for a in g.state]
        if g.control is not None:
            out["control"] = _expr_to_json(g.control)
        return out
    if isinstance(g, QubitMeasure):
        return {
            "kind": "qubitmeasure",
            "basis": g.basis,
            "outcome": _outcome_to_json(g.outcome),
        }
    if isinstance(g, CtrlPhaseFlip):
        return {"kind": "ctrlphaseflip", "control": _expr_to_json(g.control)}
    if isinstance(g, CtrlX):
        return {"kind": "ctrlx", "control": _expr_to_json(g.control)}
    if isinstance(g, CtrlZ):
        return {"kind": "ctrlz", "control": _expr_to_json(g.control)}
    if isinstance(g, CtrlSwap):
        return {"kind": "ctrlswap", "control": _expr_to_json(g.control)}
    if isinstance(g, CtrlModeSwap):
        return {"kind": "ctrlmodeswap", "control": _expr_to_json(g.control)}
    if isinstance(g, FusionCmd):
        return {
            "kind": "fusioncmd",
            "plane": g.plane,
            "alpha": _phase_to_json(g.alpha),
            "c": g.c,
            "s": _outcome_to_json(g.s),
            "k": _outcome_to_json(g.k),
        }
    if isinstance(g, KrausMap):
        return {
            "kind": "krausmap",
            "label": g.label,
            "n_dom": g.n_dom,
            "n_cod": g.n_cod,
            "outcomes": [_outcome_to_json(o) for o in g.outcomes],
            "table": [
                {
                    "key": list(key),
                    "matrix": [[_complex_to_json(x) for x in row] for row in mat],
                }
                for key, mat in g.table
            ],
        }
    raise ParseError(f"unserializable generator {g!r}")


def _gen_from_json(v: Dict[str, Any]) -> Generator:
    if not isinstance(v, dict) or "kind" not in v:
        raise ParseError(f"bad generator {v!r}")
    kind = v["kind"]
    try:
        if kind == "zspider":
            return ZSpider(int(v["m_in"]), int(v["n_out"]), _phase_from_json(v["phase"]))
        if kind == "xspider":
            return XSpider(int(v["m_in"]), int(v["n_out"]), _phase_from_json(v["phase"]))
        if kind == "hadamard":
            return Hadamard()
        if kind == "scalar":
            return Scalar(_complex_from_json(v["value"]))
        if kind == "beamsplitter":
            return BeamSplitter()
        if kind == "phaseshift":
            return PhaseShift(_phase_from_json(v["phase"]))
        if kind == "photonprep":
            values = tuple(int(x) for x in v["values"]) if "values" in v else None
            return PhotonPrep(_expr_from_json(v["n"]), values)
        if kind == "photondetect":
            return PhotonDetect(_outcome_from_json(v["outcome"]))
        if kind == "wnode":
            return WNode()
        if kind == "wdagger":
            return WDagger()
        if kind == "endophase":
            return EndoPhase(_complex_from_json(v["c"]))
        if kind == "triangle":
            return Triangle()
        if kind == "drsplit":
            return DRSplit()
        if kind == "drmerge":
            return DRMerge()
        if kind == "swap":
            return Swap(_kind_from_json(v["a"]), _kind_from_json(v["b"]))
        if kind == "id":
            return Id(_kind_from_json(v["wire"]))
        if kind == "discard":
            return Discard(_kind_from_json(v["wire"]))
        if kind == "qubitprep":
            state = v.get("state", "0")
            if not isinstance(state, str):
                state = tuple(_complex_from_json(a) for a in state)
            control = _expr_from_json(v["control"]) if "control" in v else None
            return QubitPrep(state, control)
        if kind == "qubitmeasure":
            return QubitMeasure(v["basis"], _outcome_from_json(v["outcome"]))
        if kind == "ctrlphaseflip":
            return CtrlPhaseFlip(_expr_from_json(v["control"]))
        if kind == "ctrlx":
            return CtrlX(_expr_from_json(v["control"]))
        if kind == "ctrlz":
            return CtrlZ(_expr_from_json(v["control"]))
        if kind == "ctrlswap":
            return CtrlSwap(_expr_from_json(v["control"]))
        if kind == "ctrlmodeswap":
            return CtrlModeSwap(_expr_from_json(v["control"]))
        if kind == "fusioncmd":
            return FusionCmd(
                v["plane"],
                _phase_from_json(v["alpha"]),
                int(v.get("c", 0)),
                _outcome_from_json(v["s"]),
                _outcome_from_json(v["k"]),
            )
        if kind == "krausmap":
            table = tuple(
                (
                    tuple(int(b) for b in entry["key"]),
                    _freeze_matrix(
                        [[_complex_from_json(x) for x in row] for row in entry["matrix"]]
                    ),
                )
                for entry in v["table"]
            )
            return KrausMap(
                v["label"],
                int(v["n_dom"]),
                int(v["n_cod"]),
                tuple(_outcome_from_json(o) for o in v["outcomes"]),
                table,
            )
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as err:
        raise ParseError(f"bad {kind} generator: {err}") from err
    raise ParseError(f"unknown generator kind {kind!r}")


# ---------------------------------------------------------------------------
# diagrams and channels
# ---------------------------------------------------------------------------


def diagram_to_json(d: Diagram) -> Dict[str, Any]:
    if isinstance(d, Seq):
        return {"seq": [diagram_to_json(d.first), diagram_to_json(d.second)]}
    if isinstance(d, Par):
        return {"par": [diagram_to_json(d.left), diagram_to_json(d.right)]}
    if isinstance(d, Leaf):
        return {"gen": _gen_to_json(d.gen)}
    raise ParseError(f"not a diagram node {d!r}")


def diagram_from_json(v: Any) -> Diagram:
    if not isinstance(v, dict):
        raise ParseError(f"bad diagram {v!r}")
    if "seq" in v:
        parts = [diagram_from_json(p) for p in v["seq"]]
        if len(parts) < 2:
            raise ParseError("seq needs at least two parts")
        d = parts[0]
        for p in parts[1:]:
            d = Seq(d, p)
        return d
    if "par" in v:
        parts = [diagram_from_json(p) for p in v["par"]]
        if len(parts) < 2:
            raise ParseError("par needs at least two parts")
        d = parts[0]
        for p in parts[1:]:
            d = Par(d, p)
        return d
    if "gen" in v:
        return Leaf(_gen_from_json(v["gen"]))
    raise ParseError(f"bad diagram node {v!r}")


def channel_to_json(c: ChannelDiagram) -> Dict[str, Any]:
    out = diagram_to_json(c.underlying)
    out["vars"] = [
        {"name": name, "values": list(vals)} for name, vals in c.var_domains
    ]
    out["annotations"] = [
        {
            "variant": a.variant,
            "var": a.var,
            "expr": _expr_to_json(a.expr),
        }
        for a in c.annotations
    ]
    return out


def channel_from_json(v: Any) -> ChannelDiagram:
    d = diagram_from_json(v)
    anns = []
    for a in v.get("annotations", ()):
        try:
            variant, var = a["variant"], a["var"]
            expr = a["expr"]
        except (KeyError, TypeError) as err:
            raise ParseError(f"bad annotation {a!r}") from err
        if variant == "postselect":
            anns.append(Annotation(variant, var, int(expr)))
        else:
            anns.append(Annotation(variant, var, _expr_from_json(expr)))
    domains = {}
    for entry in v.get("vars", ()):
        try:
            domains[entry["name"]] = tuple(int(x) for x in entry["values"])
        except (KeyError, TypeError, ValueError) as err:
            raise ParseError(f"bad var domain {entry!r}") from err
    return ChannelDiagram.of(d, anns, domains)


# ---------------------------------------------------------------------------
# graphs and fusion networks
# ---------------------------------------------------------------------------


def _labels_to_json(g) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for vtx in g.vertices:
        entry: Dict[str, Any] = {}
        if vtx in g.labels:
            entry["plane"] = g.labels[vtx]
        if vtx in g.alphas:
            entry["alpha"] = float(g.alphas[vtx])
        c = getattr(g, "cliffords", {}).get(vtx, 0) or getattr(
            g, "output_twists", {}
        ).get(vtx, 0)
        if c:
            entry["c"] = int(c)
        if entry:
            out[str(vtx)] = entry
    return out


def graph_to_json(g: LabelledOpenGraph) -> Dict[str, Any]:
    return {
        "vertices": list(g.vertices),
        "edges": sorted([list(e) for e in g.edges]),
        "inputs": list(g.inputs),
        "outputs": list(g.outputs),
        "labels": _labels_to_json(g),
    }


def _parse_labels(v: Any, vertices) -> tuple:
    # JSON object keys are strings; map them back onto the vertex ids
    by_name = {str(x): x for x in vertices}
    labels: Dict[Any, str] = {}
    alphas: Dict[Any, float] = {}
    cs: Dict[Any, int] = {}
    for key, entry in (v or {}).items():
        if not isinstance(entry, dict):
            raise ParseError(f"bad label entry {entry!r}")
        vtx = by_name.get(str(key), key)
        if "plane" in entry:
            labels[vtx] = entry["plane"]
        if "alpha" in entry:
            alphas[vtx] = float(entry["alpha"])
        if "c" in entry:
            cs[vtx] = int(entry["c"])
    return labels, alphas, cs


def graph_from_json(v: Any) -> LabelledOpenGraph:
    try:
        labels, alphas, cs = _parse_labels(v.get("labels"), v["vertices"])
        return LabelledOpenGraph.make(
            v["vertices"],
            v.get("edges", ()),
            v.get("inputs", ()),
            v.get("outputs", ()),
            labels,
            alphas,
            output_twists=cs,
        )
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as err:
        raise ParseError(f"bad graph JSON: {err}") from err


def network_to_json(fn: FusionNetwork) -> Dict[str, Any]:
    out = {
        "vertices": list(fn.vertices),
        "edges": sorted([list(e) for e in fn.edges]),
        "inputs": list(fn.inputs),
        "outputs": list(fn.outputs),
        "labels": _labels_to_json(fn),
        "fusions": [
            {"pair": list(f.pair), "plane": f.plane, "alpha": float(f.alpha)}
            for f in fn.fusions
        ],
    }
    return out


def network_from_json(v: Any) -> FusionNetwork:
    try:
        labels, alphas, cs = _parse_labels(v.get("labels"), v["vertices"])
        fusions = tuple(
            Fusion(tuple(f["pair"]), f.get("plane", "X"), float(f.get("alpha", 0.0)))
            for f in v.get("fusions", ())
        )
        return FusionNetwork.make(
            v["vertices"],
            v.get("edges", ()),
            v.get("inputs", ()),
            v.get("outputs", ()),
            fusions,
            labels,
            alphas,
            cs,
        )
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as err:
        raise ParseError(f"bad fusion network JSON: {err}") from err


# ---------------------------------------------------------------------------
# streams
# ---------------------------------------------------------------------------


def _kinds_to_json(kinds) -> List[str]:
    return [_kind_to_json(k) for k in kinds]


def _kinds_from_json(v) -> tuple:
    return tuple(_kind_from_json(k) for k in v)


def _objseq_to_json(s: ObjectSeq) -> Dict[str, Any]:
    return {
        "prefix": [_kinds_to_json(k) for k in s.prefix],
        "cycle": [_kinds_to_json(k) for k in s.cycle],
    }


def _objseq_from_json(v) -> ObjectSeq:
    return ObjectSeq(
        tuple(_kinds_from_json(k) for k in v.get("prefix", ())),
        tuple(_kinds_from_json(k) for k in v.get("cycle", ((),))) or ((),),
    )


def stream_to_json(spec: StreamSpec, prefix_len: Optional[int] = None,
                   cycle_len: int = 1) -> Dict[str, Any]:
    """Serialize an eventually-periodic stream.

    The slice provider is sampled at ``prefix_len`` initial steps (by
    default the memory/io prefix length) plus ``cycle_len`` repeating
    steps; deserialization replays them periodically.
    """
    if prefix_len is None:
        prefix_len = max(
            len(spec.memory.prefix), len(spec.inputs.prefix), len(spec.outputs.prefix)
        )
    return {
        "memory": _objseq_to_json(spec.memory),
        "inputs": _objseq_to_json(spec.inputs),
        "outputs": _objseq_to_json(spec.outputs),
        "horizon": spec.horizon,
        "prefix": [channel_to_json(spec.slice_at(t)) for t in range(prefix_len)],
        "cycle": [
            channel_to_json(spec.slice_at(prefix_len + t)) for t in range(cycle_len)
        ],
    }


def stream_from_json(v: Any) -> StreamSpec:
    try:
        memory = _objseq_from_json(v["memory"])
        inputs = _objseq_from_json(v.get("inputs", {}))
        outputs = _objseq_from_json(v.get("outputs", {}))
        prefix = [channel_from_json(c) for c in v.get("prefix", ())]
        cycle = [channel_from_json(c) for c in v["cycle"]]
        horizon = int(v.get("horizon", 16))
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as err:
        raise ParseError(f"bad stream JSON: {err}") from err
    if not cycle:
        raise ParseError("stream cycle must be non-empty")

    def slices(t: int) -> ChannelDiagram:
        if t < len(prefix):
            return prefix[t]
        return cycle[(t - len(prefix)) % len(cycle)]

    return StreamSpec(memory, inputs, outputs, slices, horizon)

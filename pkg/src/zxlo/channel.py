"""Classically-annotated quantum channels.

A channel diagram wraps a base diagram whose leaves may mention
classical variables (measurement outcomes, controls), together with
annotations: coarse-graining z = g(outcomes), feedforward x = f(outcomes)
and post-selection y = const. Branches are obtained by enumerating
variable assignments consistent with the annotations, substituting, and
interpreting the resulting pure diagram; discarded wires are routed into
an environment factor that is traced out at the CQ level.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import exprs
from .diagram import Diagram, Leaf, Par, Seq
from .errors import (
    CausalityCycle,
    DomainOverflow,
    NoBranches,
    NotPure,
    ShapeMismatch,
)
from .generators import (
    Discard,
    FusionCmd,
    Generator,
    Id,
    PhotonDetect,
    PhotonPrep,
    QubitMeasure,
    QubitPrep,
)
from .interp import generator_matrix, photon_budget
from .spaces import DenseOperator, Space, equal_up_to_scalar
from .wires import WireKind


@dataclass(frozen=True)
class Annotation:
    variant: str  # "coarse" | "feedforward" | "postselect"
    var: str
    expr: exprs.Expr

    def __post_init__(self):
        if self.variant not in ("coarse", "feedforward", "postselect"):
            raise ValueError(f"unknown annotation variant {self.variant!r}")


def coarse(var: str, expr: exprs.Expr) -> Annotation:
    return Annotation("coarse", var, expr)


def feedforward(var: str, expr: exprs.Expr) -> Annotation:
    return Annotation("feedforward", var, expr)


def postselect(var: str, value: int) -> Annotation:
    return Annotation("postselect", var, value)


@dataclass(frozen=True)
class ChannelDiagram:
    underlying: Diagram
    annotations: Tuple[Annotation, ...] = ()
    var_domains: Tuple[Tuple[str, Tuple[int, ...]], ...] = ()

    @staticmethod
    def of(
        diagram: Diagram,
        annotations: Sequence[Annotation] = (),
        var_domains: Optional[Dict[str, Sequence[int]]] = None,
    ) -> "ChannelDiagram":
        doms = tuple(
            (name, tuple(vals)) for name, vals in (var_domains or {}).items()
        )
        return ChannelDiagram(diagram, tuple(annotations), doms)

    def dom(self):
        return self.underlying.dom()

    def cod(self):
        return self.underlying.cod()

    @property
    def domains(self) -> Dict[str, Tuple[int, ...]]:
        return dict(self.var_domains)

    def commands(self) -> List[Generator]:
        return [g for g in self.underlying.leaves() if not g.is_pure]

    def outcome_vars(self) -> List[str]:
        out = []
        for g in self.commands():
            out.extend(g.outcome_vars())
        return out

    def control_vars(self) -> List[str]:
        names: List[str] = []
        for g in self.commands():
            for e in g.control_exprs():
                for v in sorted(exprs.free_vars(e)):
                    if v not in names:
                        names.append(v)
        return names

    def annotation_map(self) -> Dict[str, Annotation]:
        return {a.var: a for a in self.annotations}

    def input_vars(self) -> List[str]:
        """Control variables not driven by a feedforward annotation."""
        fed = {a.var for a in self.annotations if a.variant == "feedforward"}
        defined = set(self.outcome_vars()) | {
            a.var for a in self.annotations if a.variant == "coarse"
        }
        return [v for v in self.control_vars() if v not in fed and v not in defined]

    def output_vars(self) -> List[str]:
        """Outcome and coarse-graining variables not consumed."""
        consumed = set()
        for a in self.annotations:
            if a.variant == "coarse":
                consumed |= exprs.free_vars(a.expr)
            elif a.variant == "postselect":
                consumed.add(a.var)
        coarse_vars = [a.var for a in self.annotations if a.variant == "coarse"]
        return [
            v
            for v in self.outcome_vars() + coarse_vars
            if v not in consumed
        ]


def check_annotations(c: ChannelDiagram) -> List[List[str]]:
    """Topological layering of variables, or CausalityCycle."""
    commands = c.commands()
    bind_time: Dict[str, int] = {}
    for i, g in enumerate(commands):
        for v in g.outcome_vars():
            if v in bind_time:
                raise CausalityCycle([v])  # duplicate binding
            bind_time[v] = i
    ann = c.annotation_map()
    inputs = set(c.input_vars())

    avail: Dict[str, float] = {}
    visiting: set = set()

    def resolve(v: str) -> float:
        if v in avail:
            return avail[v]
        if v in visiting:
            raise CausalityCycle(sorted(visiting))
        visiting.add(v)
        if v in bind_time and (v not in ann or ann[v].variant == "postselect"):
            t: float = bind_time[v]
        elif v in ann and ann[v].variant in ("coarse", "feedforward"):
            deps = exprs.free_vars(ann[v].expr)
            t = max((resolve(u) for u in deps), default=-1.0)
        elif v in inputs:
            t = -1.0
        else:
            # unconstrained control treated as an input
            t = -1.0
        visiting.discard(v)
        avail[v] = t
        return t

    for v in bind_time:
        resolve(v)
    for a in c.annotations:
        resolve(a.var)

    # every control use must strictly follow the availability of its vars
    for i, g in enumerate(commands):
        for e in g.control_exprs():
            for v in exprs.free_vars(e):
                if resolve(v) >= i:
                    raise CausalityCycle([v])

    layers: Dict[float, List[str]] = {}
    for v, t in sorted(avail.items()):
        layers.setdefault(t, []).append(v)
    return [layers[t] for t in sorted(layers)]


def _outcome_domain(g: Generator, var: str, cutoff: int, declared) -> Tuple[int, ...]:
    if isinstance(g, (QubitMeasure,)):
        dom: Tuple[int, ...] = (0, 1)
    elif isinstance(g, FusionCmd):
        dom = (0, 1)
    elif isinstance(g, PhotonDetect):
        dom = tuple(range(cutoff + 1))
    else:
        dom = (0, 1)
    if declared is not None:
        if max(declared) > max(dom):
            raise DomainOverflow(f"declared domain of {var} exceeds cutoff bound")
        dom = tuple(declared)
    return dom


@dataclass
class Branch:
    assignment: Dict[str, int]
    kraus: DenseOperator
    env_wires: int  # number of trailing cod wires that are environment

    def active_cod(self) -> Tuple[WireKind, ...]:
        w = self.kraus.cod.wires
        return w[: len(w) - self.env_wires]


def _to_layers(d: Diagram) -> List[List[Generator]]:
    if isinstance(d, Leaf):
        return [[d.gen]]
    if isinstance(d, Seq):
        return _to_layers(d.first) + _to_layers(d.second)
    if isinstance(d, Par):
        la = _to_layers(d.left)
        lb = _to_layers(d.right)
        pad_a = [Id(w) for w in d.left.cod()]
        pad_b = [Id(w) for w in d.right.cod()]
        n = max(len(la), len(lb))
        la = la + [list(pad_a)] * (n - len(la))
        lb = lb + [list(pad_b)] * (n - len(lb))
        return [a + b for a, b in zip(la, lb)]
    raise TypeError(f"not a diagram: {d!r}")


def interpret_with_env(d: Diagram, cutoff: int) -> Tuple[DenseOperator, int]:
    """Interpret a substituted diagram, parking discarded wires.

    Returns (operator, env_count): the operator maps dom(d) to
    active-cod + env wires (env at the right, in discard order).
    """
    layers = _to_layers(d)
    dom_space = Space(d.dom(), cutoff)
    current = DenseOperator(dom_space, dom_space, np.eye(dom_space.dim, dtype=complex))
    env_wires: List[WireKind] = []
    for layer in layers:
        discard_positions: List[Tuple[int, WireKind]] = []
        pos = 0
        op: Optional[DenseOperator] = None
        for g in layer:
            if isinstance(g, Discard):
                gm = generator_matrix(Id(g.kind), cutoff)
                discard_positions.append((pos, g.kind))
            else:
                gm = generator_matrix(g, cutoff)
            op = gm if op is None else op.tensor(gm)
            pos += len(gm.cod.wires)
        if op is None:
            from .generators import Scalar

            op = generator_matrix(Scalar(1.0), cutoff)
        if env_wires:
            env_space = Space(tuple(env_wires), cutoff)
            op = op.tensor(
                DenseOperator(env_space, env_space, np.eye(env_space.dim, dtype=complex))
            )
        current = current.then(op)
        # park freshly discarded wires at the right end
        for pos, kind in reversed(discard_positions):
            wires = current.cod.wires
            n = len(wires)
            perm = [i for i in range(n) if i != pos] + [pos]
            new_space, idx = current.cod.select(tuple(perm))
            # idx maps old basis index -> new basis index
            mat = np.zeros((new_space.dim, current.dom.dim), dtype=complex)
            mat[idx, :] = current.mat
            current = DenseOperator(current.dom, new_space, mat)
            env_wires.append(kind)
    return current, len(env_wires)


def enumerate_branches(
    c: ChannelDiagram,
    cutoff: Optional[int] = None,
    inputs: Optional[Dict[str, int]] = None,
) -> List[Branch]:
    """All branches consistent with the annotations.

    ``inputs`` fixes classical input variables; unfixed inputs are
    enumerated over their declared domains (default {0,1}).
    """
    check_annotations(c)
    if cutoff is None:
        cutoff = photon_budget(c.underlying, 0)
    declared = c.domains
    ann = c.annotation_map()
    post = {a.var: int(a.expr) for a in c.annotations if a.variant == "postselect"}

    free_names: List[str] = []
    free_domains: List[Tuple[int, ...]] = []
    for g in c.commands():
        for v in g.outcome_vars():
            if v in post:
                continue
            free_names.append(v)
            free_domains.append(_outcome_domain(g, v, cutoff, declared.get(v)))
    for v in c.input_vars():
        if inputs is not None and v in inputs:
            continue
        free_names.append(v)
        free_domains.append(declared.get(v, (0, 1)))

    branches: List[Branch] = []
    base_env: Dict[str, int] = dict(post)
    if inputs:
        base_env.update(inputs)
    for values in itertools.product(*free_domains) if free_names else [()]:
        env = dict(base_env)
        env.update(zip(free_names, values))
        ok = True
        # resolve annotation-defined vars (coarse + feedforward), in
        # dependency order via simple fixpoint iteration
        pending = [a for a in c.annotations if a.variant in ("coarse", "feedforward")]
        while pending:
            progressed = False
            rest = []
            for a in pending:
                if exprs.free_vars(a.expr) <= env.keys():
                    val = exprs.evaluate(a.expr, env)
                    if a.var in env and env[a.var] != val:
                        ok = False
                    env[a.var] = val
                    progressed = True
                else:
                    rest.append(a)
            if not progressed:
                raise CausalityCycle([a.var for a in rest])
            pending = rest
            if not ok:
                break
        if not ok:
            continue
        pure = c.underlying.substitute(env)
        missing = [
            g for g in pure.leaves() if not g.is_pure and not isinstance(g, Discard)
        ]
        if missing:
            raise NotPure(f"unresolved commands after substitution: {missing}")
        kraus, n_env = interpret_with_env(pure, cutoff)
        branches.append(Branch(env, kraus, n_env))
    return branches


@dataclass
class CQState:
    """Unnormalized classical-quantum state: assignment-keyed densities."""

    space: Space
    entries: List[Tuple[Dict[str, int], np.ndarray]]

    @staticmethod
    def pure(space: Space, vec: np.ndarray, assignment=None) -> "CQState":
        rho = np.outer(vec, vec.conj())
        return CQState(space, [(dict(assignment or {}), rho)])

    @staticmethod
    def density(space: Space, rho: np.ndarray, assignment=None) -> "CQState":
        return CQState(space, [(dict(assignment or {}), np.asarray(rho, complex))])

    def total_trace(self) -> float:
        return float(sum(np.trace(rho).real for _, rho in self.entries))

    def min_eigenvalue(self) -> float:
        vals = []
        for _, rho in self.entries:
            vals.extend(np.linalg.eigvalsh((rho + rho.conj().T) / 2))
        return float(min(vals)) if vals else 0.0


def trace_out_env(op: DenseOperator, env_wires: int, rho: np.ndarray) -> np.ndarray:
    """tr_E(K rho K+) for K = op with env_wires trailing environment wires."""
    out = op.mat @ rho @ op.mat.conj().T
    total = len(op.cod.wires)
    active = total - env_wires
    if env_wires == 0:
        return out
    _, _, il, ir = op.cod.split(active)
    keep_dim = Space(op.cod.wires[:active], op.cod.cutoff).dim
    result = np.zeros((keep_dim, keep_dim), dtype=complex)
    mask = ir[:, None] == ir[None, :]
    np.add.at(result, (il[:, None], il[None, :]), out * mask)
    return result


def apply_cq(
    c: ChannelDiagram,
    state: CQState,
    classical_inputs: Optional[Dict[str, int]] = None,
    cutoff: Optional[int] = None,
) -> CQState:
    if cutoff is None:
        cutoff = max(
            photon_budget(c.underlying, 0) + _space_photons(state.space),
            state.space.cutoff,
        )
    out_vars = c.output_vars()
    grouped: Dict[Tuple[Tuple[str, int], ...], np.ndarray] = {}
    out_space: Optional[Space] = None
    for in_assignment, rho in state.entries:
        merged_inputs = dict(classical_inputs or {})
        merged_inputs.update(in_assignment)
        rho_grown = _grow_density(state.space, rho, cutoff)
        for br in enumerate_branches(c, cutoff, inputs=merged_inputs):
            if br.kraus.dom.wires != state.space.wires:
                raise ShapeMismatch(
                    f"state on {state.space.wires}, channel expects {br.kraus.dom.wires}"
                )
            new_rho = trace_out_env(br.kraus, br.env_wires, rho_grown)
            key = tuple(
                (v, br.assignment[v]) for v in out_vars if v in br.assignment
            )
            if key in grouped:
                grouped[key] = grouped[key] + new_rho
            else:
                grouped[key] = new_rho
            out_space = Space(br.active_cod(), cutoff)
    if out_space is None:
        raise NoBranches("channel produced no branches")
    return CQState(out_space, [(dict(k), v) for k, v in grouped.items()])


def _space_photons(space: Space) -> int:
    return space.cutoff


def _grow_density(space: Space, rho: np.ndarray, cutoff: int) -> np.ndarray:
    """Embed a density matrix into the same wires at a larger cutoff."""
    if cutoff == space.cutoff:
        return np.asarray(rho, complex)
    big = Space(space.wires, cutoff)
    idx = [big.index[state] for state in space.basis]
    out = np.zeros((big.dim, big.dim), dtype=complex)
    out[np.ix_(idx, idx)] = rho
    return out


def outcome_probability(
    c: ChannelDiagram,
    state: CQState,
    predicate: Callable[[Dict[str, int]], bool],
    classical_inputs: Optional[Dict[str, int]] = None,
    cutoff: Optional[int] = None,
) -> float:
    result = apply_cq(c, state, classical_inputs, cutoff)
    total = 0.0
    for assignment, rho in result.entries:
        if predicate(assignment):
            total += float(np.trace(rho).real)
    return total


def is_trace_preserving(
    c: ChannelDiagram, cutoff: Optional[int] = None, tol: float = 1e-9
) -> bool:
    if cutoff is None:
        cutoff = photon_budget(c.underlying, 0)
    input_vars = c.input_vars()
    declared = c.domains
    input_choices = [
        dict(zip(input_vars, vals))
        for vals in itertools.product(
            *(declared.get(v, (0, 1)) for v in input_vars)
        )
    ] or [{}]
    dom_space = Space(c.underlying.dom(), cutoff)
    eye = np.eye(dom_space.dim)
    for inputs in input_choices:
        total = np.zeros((dom_space.dim, dom_space.dim), dtype=complex)
        for br in enumerate_branches(c, cutoff, inputs=inputs):
            total += br.kraus.mat.conj().T @ br.kraus.mat
        if np.max(np.abs(total - eye)) > tol:
            return False
    return True


@dataclass
class DeterminismVerdict:
    verdict: str  # NotDeterministic | Deterministic | StronglyDeterministic
    witness: Optional[Tuple[Dict[str, int], Dict[str, int]]] = None


def classify_determinism(
    c: ChannelDiagram,
    cutoff: Optional[int] = None,
    tol: float = 1e-8,
    inputs: Optional[Dict[str, int]] = None,
) -> DeterminismVerdict:
    for g in c.commands():
        if isinstance(g, Discard):
            raise NotPure("determinism classification requires a noiseless channel")
    branches = enumerate_branches(c, cutoff, inputs=inputs)
    if not branches:
        raise NoBranches("no branches to classify")
    ref = branches[0]
    moduli = []
    for br in branches[1:]:
        z = equal_up_to_scalar(br.kraus, ref.kraus, tol)
        if z is None:
            return DeterminismVerdict(
                "NotDeterministic", (ref.assignment, br.assignment)
            )
        moduli.append(abs(z))
    if all(abs(m - 1.0) <= max(tol, 1e-7) for m in moduli):
        return DeterminismVerdict("StronglyDeterministic")
    return DeterminismVerdict("Deterministic")


def branch_choi(br: Branch) -> np.ndarray:
    """Choi matrix contribution of one branch (environment traced out)."""
    total = len(br.kraus.cod.wires)
    active = total - br.env_wires
    if br.env_wires == 0:
        k = br.kraus.mat
        v = k.reshape(-1)
        return np.outer(v, v.conj())
    _, env_space, il, ir = br.kraus.cod.split(active)
    keep_dim = Space(br.kraus.cod.wires[:active], br.kraus.cod.cutoff).dim
    out = np.zeros((keep_dim * br.kraus.dom.dim,) * 2, dtype=complex)
    for e in range(env_space.dim):
        rows = np.where(ir == e)[0]
        k = np.zeros((keep_dim, br.kraus.dom.dim), dtype=complex)
        k[il[rows], :] = br.kraus.mat[rows, :]
        v = k.reshape(-1)
        out += np.outer(v, v.conj())
    return out


def channel_choi(
    c: ChannelDiagram,
    cutoff: Optional[int] = None,
    success_fn: Optional[Callable[[Dict[str, int]], bool]] = None,
    inputs: Optional[Dict[str, int]] = None,
) -> np.ndarray:
    """Choi matrix of the (optionally post-selected) CQ map, classical
    outputs summed over."""
    total = None
    for br in enumerate_branches(c, cutoff, inputs=inputs):
        if success_fn is not None and not success_fn(br.assignment):
            continue
        contrib = branch_choi(br)
        total = contrib if total is None else total + contrib
    if total is None:
        raise NoBranches("no branches selected")
    return total


def implements_with_probability(
    d: ChannelDiagram,
    target: ChannelDiagram,
    success_fn: Callable[[Dict[str, int]], bool],
    cutoff: Optional[int] = None,
    tol: float = 1e-8,
) -> float:
    if d.underlying.dom() != target.underlying.dom():
        raise ShapeMismatch("channel domains differ")
    cutoff_d = cutoff if cutoff is not None else photon_budget(d.underlying, 0)
    cutoff_t = cutoff if cutoff is not None else photon_budget(target.underlying, 0)
    choi_d = channel_choi(d, cutoff_d, success_fn=success_fn)
    choi_t = channel_choi(target, cutoff_t)
    if choi_d.shape != choi_t.shape:
        raise ShapeMismatch("channel codomains differ")
    z = equal_up_to_scalar(choi_d, choi_t, tol)
    if z is None or abs(z.imag) > tol or z.real <= 0:
        return 0.0
    return float(z.real)

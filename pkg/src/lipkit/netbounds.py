"""Certified Lipschitz bounds on network-shaped computation graphs.

A graph of typed nodes (linear / activation / residual / attention / plain
constants) with a unique source and sink supports: per-node constants, the
product bound along a chain, the path-sum bound computed by dynamic
programming in topological order, and a tighter factorization across
articulation points. Companion closed forms cover residual modules,
addition/concatenation algebra, attention bounds, pairwise spectral
alignment refinement, and margin-based certified radii.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import networkx as nx
import numpy as np

from .activations import ActivationSpec, closed_form_lipschitz, softmax_jacobian
from .errors import (
    CycleDetected,
    GraphInvalid,
    InvalidParams,
    LengthMismatch,
    NonBracketable,
    NotAPath,
    UnknownNode,
)
from .matcore import DenseMatrix
from .specest import power_iteration

NODE_KINDS = ("input", "linear", "activation", "scalar_lip", "residual_group", "attention")


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    weight_ref: Optional[str] = None          # linear
    activation: Optional[ActivationSpec] = None  # activation
    lip: Optional[float] = None               # scalar_lip
    inner_lip: Optional[float] = None         # residual_group
    attention_kind: Optional[str] = None      # attention
    attention_params: Optional[dict] = None

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise GraphInvalid(f"node {self.id!r}: unknown kind {self.kind!r}")
        if self.kind == "linear" and not self.weight_ref:
            raise GraphInvalid(f"linear node {self.id!r} needs weight_ref")
        if self.kind == "activation" and self.activation is None:
            raise GraphInvalid(f"activation node {self.id!r} needs an ActivationSpec")
        if self.kind == "scalar_lip" and (self.lip is None or self.lip < 0):
            raise GraphInvalid(f"scalar_lip node {self.id!r} needs lip >= 0")
        if self.kind == "residual_group" and (self.inner_lip is None or self.inner_lip < 0):
            raise GraphInvalid(f"residual_group node {self.id!r} needs inner_lip >= 0")
        if self.kind == "attention" and not self.attention_kind:
            raise GraphInvalid(f"attention node {self.id!r} needs attention_kind")


@dataclass(frozen=True)
class NodeLip:
    node_id: str
    lip: float
    provenance: str  # closed_form | power_iteration | user_supplied
    iterations: Optional[int] = None
    seed: Optional[int] = None


class NetworkGraph:
    """Directed acyclic computation graph with one source and one sink."""

    def __init__(self, nodes, edges, matrices=None, source=None, sink=None):
        self.nodes = {n.id: n for n in nodes}
        if len(self.nodes) != len(nodes):
            raise GraphInvalid("duplicate node ids")
        self.matrices = dict(matrices or {})
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        for u, v in edges:
            if u not in self.nodes or v not in self.nodes:
                raise GraphInvalid(f"edge ({u!r}, {v!r}) references unknown node")
            g.add_edge(u, v)
        if not nx.is_directed_acyclic_graph(g):
            raise CycleDetected("graph contains a directed cycle")
        sources = [n for n in g if g.in_degree(n) == 0]
        sinks = [n for n in g if g.out_degree(n) == 0]
        if len(sources) != 1 or (source is not None and sources[0] != source):
            raise GraphInvalid(f"expected the unique in-degree-0 node to be the source, got {sources}")
        if len(sinks) != 1 or (sink is not None and sinks[0] != sink):
            raise GraphInvalid(f"expected the unique out-degree-0 node to be the sink, got {sinks}")
        self.source = sources[0]
        self.sink = sinks[0]
        if not nx.has_path(g, self.source, self.sink):
            raise GraphInvalid("sink not reachable from source")
        for n in nodes:
            if n.kind == "linear" and n.weight_ref not in self.matrices:
                raise GraphInvalid(f"node {n.id!r}: weight_ref {n.weight_ref!r} unresolved")
        self.digraph = g
        self.topo_order = list(nx.topological_sort(g))
        self._topo_index = {n: i for i, n in enumerate(self.topo_order)}

    def node(self, node_id) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no node {node_id!r}") from None


def _spectral_norm_exact(m: DenseMatrix) -> float:
    return float(np.linalg.norm(m.array, 2))


def node_lipschitz(
    g: NetworkGraph,
    node_id: str,
    spectral: str = "auto",
    iters: int = 100,
    seed: int = 0,
) -> NodeLip:
    """Lipschitz constant of a single node's module.

    Linear nodes use the exact spectral norm for desk-size matrices (or
    always with spectral="full") and power iteration otherwise; the other
    kinds come from their closed forms or the user-supplied constant.
    """
    node = g.node(node_id)
    if node.kind == "input":
        return NodeLip(node_id, 1.0, "closed_form")
    if node.kind == "linear":
        mat = g.matrices[node.weight_ref]
        use_power = spectral == "power" or (spectral == "auto" and max(mat.shape) > 256)
        if use_power:
            est = power_iteration(mat, iters=iters, seed=seed)
            return NodeLip(node_id, est.sigma_est, "power_iteration", iterations=iters, seed=seed)
        return NodeLip(node_id, _spectral_norm_exact(mat), "closed_form")
    if node.kind == "activation":
        return NodeLip(node_id, closed_form_lipschitz(node.activation), "closed_form")
    if node.kind == "scalar_lip":
        return NodeLip(node_id, float(node.lip), "user_supplied")
    if node.kind == "residual_group":
        return NodeLip(node_id, residual_bound(node.inner_lip), "closed_form")
    if node.kind == "attention":
        return NodeLip(
            node_id,
            attention_bound(node.attention_kind, node.attention_params or {}),
            "closed_form",
        )
    raise GraphInvalid(f"unhandled node kind {node.kind!r}")


def all_node_lips(g: NetworkGraph, **opts) -> dict:
    return {nid: node_lipschitz(g, nid, **opts) for nid in g.nodes}


def product_bound(chain, g: NetworkGraph, lips=None, **opts) -> float:
    """Product of node constants along a directed path of the graph."""
    chain = list(chain)
    if not chain:
        raise NotAPath("empty chain")
    for nid in chain:
        g.node(nid)
    for u, v in zip(chain, chain[1:]):
        if not g.digraph.has_edge(u, v):
            raise NotAPath(f"missing edge ({u!r} -> {v!r})")
    lips = lips or all_node_lips(g, **opts)
    out = 1.0
    for nid in chain:
        out *= lips[nid].lip
    return out


@dataclass(frozen=True)
class DagBound:
    bound: float
    per_node_s: dict
    node_lips: dict


def dag_bound(g: NetworkGraph, lips=None, **opts) -> DagBound:
    """Path-sum bound via S(v) dynamic programming in topological order.

    S(source) = 1 and S(v) = Lip[h_v] * sum of S over predecessors; S(sink)
    equals the sum over all source->sink paths of the node-constant
    products.
    """
    lips = lips or all_node_lips(g, **opts)
    s = {}
    for nid in g.topo_order:
        if nid == g.source:
            s[nid] = 1.0
            continue
        acc = sum(s[u] for u in g.digraph.predecessors(nid))
        s[nid] = lips[nid].lip * acc
    return DagBound(bound=s[g.sink], per_node_s=s, node_lips=lips)


@dataclass(frozen=True)
class ArticulationBound:
    bound: float
    cut_vertices: list
    subdag_bounds: list
    node_lips: dict


def _segment_path_sum(g: NetworkGraph, lips, start, end):
    """Sum over start->end paths of the product of interior node constants
    (both endpoints excluded)."""
    between = (nx.descendants(g.digraph, start) & nx.ancestors(g.digraph, end)) | {start, end}
    s = {start: 1.0}
    for nid in g.topo_order:
        if nid not in between or nid == start:
            continue
        acc = sum(s.get(u, 0.0) for u in g.digraph.predecessors(nid) if u in between)
        s[nid] = acc if nid == end else lips[nid].lip * acc
    return s.get(end, 0.0)


def articulation_bound(g: NetworkGraph, lips=None, **opts) -> ArticulationBound:
    """Factor the path-sum bound across articulation points.

    Cut vertices of the undirected shadow (source and sink excluded) split
    the graph into sub-DAG segments; the bound is the product of segment
    path sums and cut-vertex constants. With no cuts this equals dag_bound.
    """
    lips = lips or all_node_lips(g, **opts)
    undirected = g.digraph.to_undirected()
    cuts = [
        v
        for v in nx.articulation_points(undirected)
        if v not in (g.source, g.sink)
    ]
    cuts.sort(key=g._topo_index.get)
    if not cuts:
        inner = dag_bound(g, lips=lips)
        return ArticulationBound(inner.bound, [], [inner.bound], lips)
    anchors = [g.source] + cuts + [g.sink]
    segment_sums = [
        _segment_path_sum(g, lips, a, b) for a, b in zip(anchors, anchors[1:])
    ]
    # the sink is a module of the last segment; cut vertices are their own factors
    subdag_bounds = segment_sums[:-1] + [segment_sums[-1] * lips[g.sink].lip]
    bound = 1.0
    for val in subdag_bounds:
        bound *= val
    for c in cuts:
        bound *= lips[c].lip
    return ArticulationBound(bound, cuts, subdag_bounds, lips)


def residual_bound(inner_lip: float) -> float:
    """Skip connection plus inner branch: 1 + Lip of the branch."""
    if inner_lip < 0:
        raise ValueError("inner_lip must be nonnegative")
    return 1.0 + inner_lip


def lip_algebra(op: str, lips, p: float = 2.0) -> float:
    """Combination rules: add -> sum; concat -> p-norm of the constants."""
    lips = [float(v) for v in lips]
    if any(v < 0 for v in lips):
        raise ValueError("Lipschitz constants must be nonnegative")
    if not (p >= 1 or math.isinf(p)):
        raise ValueError("p must be >= 1 or inf")
    if op == "add":
        return float(sum(lips))
    if op == "concat":
        if math.isinf(p):
            return max(lips) if lips else 0.0
        return float(sum(v**p for v in lips) ** (1.0 / p))
    raise ValueError(f"unknown op {op!r}")


def phi_inverse(y: float, tol: float = 1e-12) -> float:
    """Inverse of phi(x) = x * exp(x + 1) on x >= 0, by bracketed Newton."""
    if y < 0:
        raise NonBracketable(f"phi inverse undefined for negative input {y}")
    if y == 0:
        return 0.0
    lo, hi = 0.0, max(1.0, math.log1p(y))
    while hi * math.exp(hi + 1.0) < y:  # defensive; analytic bracket suffices
        hi *= 2.0
    x = 0.5 * (lo + hi)
    for _ in range(100):
        f = x * math.exp(x + 1.0) - y
        if f > 0:
            hi = x
        else:
            lo = x
        step = f / (math.exp(x + 1.0) * (1.0 + x))
        x_new = x - step
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) < tol:
            return x_new
        x = x_new
    return x


def _get(params, key, kind):
    try:
        return params[key]
    except KeyError:
        raise InvalidParams(f"{kind}: missing parameter {key!r}") from None


def _spec_norm(value) -> float:
    arr = value.array if isinstance(value, DenseMatrix) else np.asarray(value, dtype=float)
    return float(np.linalg.norm(arr, 2))


def _fro_norm(value) -> float:
    arr = value.array if isinstance(value, DenseMatrix) else np.asarray(value, dtype=float)
    return float(np.linalg.norm(arr))


def _inf_norm(value) -> float:
    arr = value.array if isinstance(value, DenseMatrix) else np.asarray(value, dtype=float)
    return float(np.linalg.norm(arr, np.inf))


def attention_bound(kind: str, params: dict) -> float:
    """Closed-form Lipschitz bounds for dot-product self-attention.

    kinds:
      hu_local  -- local bound on a ball: n(n+1)(||x||+delta)^2
                   [||W_V|| ||W_Q|| ||W_K^T|| + ||W_V||], spectral norms;
      kim_l2    -- global 2-norm bound, per-head (W_Q, W_V) pairs plus W_O,
                   with the x*exp(x+1) inverse at n-1;
      kim_linf  -- global inf-norm variant of the same;
      yudin     -- single-head bound through the row-wise softmax Jacobian.

    Sequence matrices x are measured in the Frobenius norm.
    """
    if kind == "hu_local":
        n = int(_get(params, "n", kind))
        delta = float(params.get("delta", 0.0))
        if "x_norm" in params:
            x_norm = float(params["x_norm"])
        else:
            x_norm = _fro_norm(_get(params, "x", kind))
        wv = _spec_norm(_get(params, "w_v", kind))
        wq = _spec_norm(_get(params, "w_q", kind))
        wk = _spec_norm(_get(params, "w_k", kind))
        return n * (n + 1) * (x_norm + delta) ** 2 * (wv * wq * wk + wv)

    if kind in ("kim_l2", "kim_linf"):
        heads = _get(params, "heads", kind)
        if not heads:
            raise InvalidParams(f"{kind}: heads list is empty")
        w_o = _get(params, "w_o", kind)
        n = int(_get(params, "n", kind))
        d = float(_get(params, "d", kind))
        h = float(len(heads))
        if n < 1:
            raise InvalidParams(f"{kind}: sequence length must be >= 1")
        inv = phi_inverse(float(n - 1))
        if kind == "kim_l2":
            head_sum = sum(_spec_norm(wq) ** 2 * _spec_norm(wv) ** 2 for wq, wv in heads)
            return (
                math.sqrt(n)
                / math.sqrt(d / h)
                * (4.0 * inv + 1.0)
                * math.sqrt(head_sum)
                * _spec_norm(w_o)
            )
        wo_t = w_o.array.T if isinstance(w_o, DenseMatrix) else np.asarray(w_o).T
        q_term = max(_inf_norm(wq) * _inf_norm(_transpose(wq)) for wq, _ in heads)
        v_term = max(_inf_norm(_transpose(wv)) for _, wv in heads)
        return (4.0 * inv + 1.0 / (d / h)) * _inf_norm(wo_t) * q_term * v_term

    if kind == "yudin":
        wq = _get(params, "w_q", kind)
        wk = _get(params, "w_k", kind)
        wv = _get(params, "w_v", kind)
        x = _get(params, "x", kind)
        x_arr = x.array if isinstance(x, DenseMatrix) else np.asarray(x, dtype=float)
        wq_arr = wq.array if isinstance(wq, DenseMatrix) else np.asarray(wq, dtype=float)
        wk_arr = wk.array if isinstance(wk, DenseMatrix) else np.asarray(wk, dtype=float)
        d = x_arr.shape[1]
        if wq_arr.shape[0] != d or wk_arr.shape[0] != d:
            raise InvalidParams(
                f"yudin: W_Q/W_K first dimension must match x's width {d}"
            )
        a = wq_arr @ wk_arr.T / math.sqrt(d)
        scores = x_arr @ a @ x_arr.T
        scores = scores - scores.max(axis=1, keepdims=True)
        e = np.exp(scores)
        p = e / e.sum(axis=1, keepdims=True)
        jac_norm = max(
            _spec_norm(softmax_jacobian(np.ascontiguousarray(row))) for row in p
        )
        return _spec_norm(wv) * (
            _spec_norm(p) + 2.0 * _fro_norm(x_arr) ** 2 * _spec_norm(a) * jac_norm
        )

    raise InvalidParams(f"unknown attention bound kind {kind!r}")


def _transpose(value):
    arr = value.array if isinstance(value, DenseMatrix) else np.asarray(value, dtype=float)
    return arr.T


def seqlip_pair_factor(u1, v1, r_l: float, r_next: float) -> float:
    """Spectral-alignment factor for one consecutive layer pair.

    Solves max over gradient patterns t in [0,1]^n of
    (1 - r_l - r_next) <t * v1, u1>^2 + r_l + r_next + r_l*r_next in closed
    form: the inner product's extremes over t are the positive-part and
    negative-part sums of u1*v1, and when the leading coefficient is
    negative the maximizer switches to t = 0.
    """
    u1 = np.asarray(u1, dtype=np.float64)
    v1 = np.asarray(v1, dtype=np.float64)
    if u1.shape != v1.shape or u1.ndim != 1:
        raise LengthMismatch(f"u1 and v1 must be 1-D of equal length, got {u1.shape} vs {v1.shape}")
    if not (0 <= r_l <= 1 and 0 <= r_next <= 1):
        raise ValueError("singular-value ratios must lie in [0, 1]")
    prod = u1 * v1
    m = max(float(prod[prod > 0].sum()) if np.any(prod > 0) else 0.0,
            -float(prod[prod < 0].sum()) if np.any(prod < 0) else 0.0)
    coef = 1.0 - r_l - r_next
    quad = m**2 if coef >= 0 else 0.0
    return math.sqrt(coef * quad + r_l + r_next + r_l * r_next)


def certified_radius(margin: float, k: float, p: float = 2.0) -> float:
    """Perturbation radius below which the argmax cannot change:
    margin / (2^(1/p) * K). K = 0 reports +inf (unbounded radius)."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    if k < 0:
        raise ValueError("Lipschitz constant must be nonnegative")
    if not (p >= 1 or math.isinf(p)):
        raise ValueError("p must be >= 1 or inf")
    if k == 0:
        return math.inf
    alpha = 1.0 if math.isinf(p) else 2.0 ** (1.0 / p)
    return margin / (alpha * k)

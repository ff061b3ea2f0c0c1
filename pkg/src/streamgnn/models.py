"""Model zoo: operator decompositions of nine message-passing architectures.

Each builder maps one architecture onto the seven-operator contract in
operators.py. The zoo splits into:

- plain aggregators (gin, commnet, monet): no neighborhood context, signed
  sums are enough;
- context models (gcn, graphsage, pinsage): a count context scales messages,
  stripped and reapplied on update;
- gat: the attention-logit sum is the context (softmax denominator);
- destination-dependent models (gat, ggcn, agnn): the local coefficient reads
  the destination embedding, so destinations whose own embedding changed must
  be recomputed over their full neighborhood (engines plan this from the
  dest_dependent flag);
- gcn additionally depends on source out-degree (src_degree_dependent), which
  widens the invalidation frontier when degrees change.

make_broken_mean_bundle ships a deliberately faulty bundle whose incremental
aggregate disagrees with its batch form; it exists to prove the condition
checker rejects it.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from . import linalg
from .errors import ConfigError, UnsupportedModel
from .graph import DynamicGraph
from .operators import (
    CTX_COUNT,
    CTX_NONE,
    CTX_SUM,
    LayerWeights,
    OperatorBundle,
    make_payload,
)

GCN = "gcn"
GRAPHSAGE = "graphsage"
PINSAGE = "pinsage"
GIN = "gin"
MONET = "monet"
COMMNET = "commnet"
GAT = "gat"
GGCN = "ggcn"
AGNN = "agnn"

MODELS = (GCN, GRAPHSAGE, PINSAGE, GIN, MONET, COMMNET, GAT, GGCN, AGNN)
BROKEN_MEAN = "broken-mean"


def _mat(rng: np.random.Generator, rows: int, cols: int, dtype: np.dtype) -> np.ndarray:
    bound = 1.0 / math.sqrt(cols)
    return rng.uniform(-bound, bound, (rows, cols)).astype(dtype)


def _vec(rng: np.random.Generator, size: int, fan_in: int, dtype: np.dtype) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size).astype(dtype)


def _layer_pairs(dims: Sequence[int]) -> list[tuple[int, int]]:
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ConfigError(f"need at least [in, out] positive dims, got {list(dims)}")
    return [(dims[i], dims[i + 1]) for i in range(len(dims) - 1)]


def _cast_layers(layers: Sequence[LayerWeights], dims: Sequence[int], dtype: np.dtype) -> tuple[LayerWeights, ...]:
    pairs = _layer_pairs(dims)
    if len(layers) != len(pairs):
        raise ConfigError(f"weights have {len(layers)} layers, dims imply {len(pairs)}")
    out = []
    for w, (d_in, d_out) in zip(layers, pairs):
        if (w.in_dim, w.out_dim) != (d_in, d_out):
            raise ConfigError(f"weights dims ({w.in_dim},{w.out_dim}) != requested ({d_in},{d_out})")
        tensors = {k: np.asarray(t, dtype=dtype) for k, t in w.tensors.items()}
        out.append(LayerWeights(d_in, d_out, tensors, dict(w.scalars)))
    return tuple(out)


# ---- builders; one per architecture ----


def _build_gcn(dims, rng, dtype, weights, degree_smoothing):
    offset = 1.0 if degree_smoothing else 0.0
    if weights is None:
        layers = tuple(
            LayerWeights(i, o, {"W": _mat(rng, o, i, dtype)}, {"degree_offset": offset})
            for i, o in _layer_pairs(dims)
        )
    else:
        layers = _cast_layers(weights, dims, dtype)

    def ms_local(w, h_u, h_v, src_degree):
        return 1.0 / math.sqrt(src_degree + w.scalars["degree_offset"])

    def ms_cbn(w, ctx, x):
        return x / math.sqrt(ctx + w.scalars["degree_offset"])

    def ms_cbn_inv(w, ctx, x):
        return x * math.sqrt(ctx + w.scalars["degree_offset"])

    def update(w, h_v, a_v):
        return linalg.relu(linalg.matvec(w.tensors["W"], a_v))

    return dict(
        layers=layers,
        ms_local=ms_local,
        f_nn=lambda w, h_u: h_u,
        ms_cbn=ms_cbn,
        ms_cbn_inv=ms_cbn_inv,
        update=update,
        agg_dims=tuple(dims[:-1]),
        ctx_kind=CTX_COUNT,
        src_degree_dependent=True,
        cbn_monotone="decreasing",
    )


def _build_graphsage(dims, rng, dtype, weights, _opt):
    if weights is None:
        layers = tuple(
            LayerWeights(i, o, {"W": _mat(rng, o, i, dtype)}) for i, o in _layer_pairs(dims)
        )
    else:
        layers = _cast_layers(weights, dims, dtype)
    return dict(
        layers=layers,
        ms_local=lambda w, h_u, h_v, d: 1.0,
        f_nn=lambda w, h_u: h_u,
        ms_cbn=lambda w, ctx, x: x / ctx,
        ms_cbn_inv=lambda w, ctx, x: x * ctx,
        update=lambda w, h_v, a_v: linalg.relu(linalg.matvec(w.tensors["W"], a_v)),
        agg_dims=tuple(dims[:-1]),
        ctx_kind=CTX_COUNT,
        cbn_monotone="decreasing",
    )


def _build_pinsage(dims, rng, dtype, weights, _opt):
    if weights is None:
        layers = tuple(
            LayerWeights(
                i,
                o,
                {"W": _mat(rng, o, 2 * i, dtype), "Q": _mat(rng, i, i, dtype), "q": _vec(rng, i, i, dtype)},
                {"alpha": 1.0},
            )
            for i, o in _layer_pairs(dims)
        )
    else:
        layers = _cast_layers(weights, dims, dtype)

    def ms_local(w, h_u, h_v, d):
        # importance-weighted transformed neighbor; the payload itself
        return w.scalars["alpha"] * linalg.relu(linalg.matvec(w.tensors["Q"], h_u) + w.tensors["q"])

    def update(w, h_v, a_v):
        return linalg.relu(linalg.matvec(w.tensors["W"], np.concatenate([h_v, a_v])))

    return dict(
        layers=layers,
        ms_local=ms_local,
        f_nn=lambda w, h_u: 1.0,
        ms_cbn=lambda w, ctx, x: x / ctx,
        ms_cbn_inv=lambda w, ctx, x: x * ctx,
        update=update,
        agg_dims=tuple(dims[:-1]),
        ctx_kind=CTX_COUNT,
        cbn_monotone="decreasing",
    )


def _build_gin(dims, rng, dtype, weights, _opt):
    if weights is None:
        layers = tuple(
            LayerWeights(i, o, {"W": _mat(rng, o, i, dtype), "W2": _mat(rng, o, o, dtype)})
            for i, o in _layer_pairs(dims)
        )
    else:
        layers = _cast_layers(weights, dims, dtype)

    def update(w, h_v, a_v):
        # 2-layer MLP on h_v + sum of neighbors (epsilon = 0)
        return linalg.matvec(w.tensors["W2"], linalg.relu(linalg.matvec(w.tensors["W"], h_v + a_v)))

    return dict(
        layers=layers,
        ms_local=lambda w, h_u, h_v, d: 1.0,
        f_nn=lambda w, h_u: h_u,
        ms_cbn=lambda w, ctx, x: x,
        ms_cbn_inv=lambda w, ctx, x: x,
        update=update,
        agg_dims=tuple(dims[:-1]),
        ctx_kind=CTX_NONE,
    )


def _build_monet(dims, rng, dtype, weights, _opt):
    if weights is None:
        layers = []
        for i, o in _layer_pairs(dims):
            seed_mat = rng.uniform(-1.0, 1.0, (i, i)) / math.sqrt(i)
            kernel = (-(seed_mat @ seed_mat.T) / i).astype(dtype)  # negative definite
            layers.append(
                LayerWeights(
                    i,
                    o,
                    {"W": _mat(rng, o, 1, dtype), "Wq": kernel, "mu": rng.uniform(-1.0, 1.0, i).astype(dtype)},
                )
            )
        layers = tuple(layers)
    else:
        layers = _cast_layers(weights, dims, dtype)

    def ms_local(w, h_u, h_v, d):
        diff = h_u - w.tensors["mu"]
        return float(np.exp(0.5 * float(diff @ (w.tensors["Wq"] @ diff))))

    return dict(
        layers=layers,
        ms_local=ms_local,
        f_nn=lambda w, h_u: 1.0,
        ms_cbn=lambda w, ctx, x: x,
        ms_cbn_inv=lambda w, ctx, x: x,
        update=lambda w, h_v, a_v: linalg.relu(linalg.matvec(w.tensors["W"], a_v)),
        agg_dims=(1,) * (len(dims) - 1),
        ctx_kind=CTX_NONE,
    )


def _build_commnet(dims, rng, dtype, weights, _opt):
    if weights is None:
        layers = tuple(
            LayerWeights(i, o, {"W": _mat(rng, o, i, dtype), "W2": _mat(rng, o, i, dtype)})
            for i, o in _layer_pairs(dims)
        )
    else:
        layers = _cast_layers(weights, dims, dtype)
    return dict(
        layers=layers,
        ms_local=lambda w, h_u, h_v, d: 1.0,
        f_nn=lambda w, h_u: h_u,
        ms_cbn=lambda w, ctx, x: x,
        ms_cbn_inv=lambda w, ctx, x: x,
        update=lambda w, h_v, a_v: linalg.matvec(w.tensors["W"], h_v) + linalg.matvec(w.tensors["W2"], a_v),
        agg_dims=tuple(dims[:-1]),
        ctx_kind=CTX_NONE,
    )


def _build_gat(dims, rng, dtype, weights, _opt):
    if weights is None:
        layers = tuple(
            LayerWeights(i, o, {"W": _mat(rng, o, i, dtype), "a": _vec(rng, 2 * o, 2 * o, dtype)})
            for i, o in _layer_pairs(dims)
        )
    else:
        layers = _cast_layers(weights, dims, dtype)

    def ms_local(w, h_u, h_v, d):
        # attention logit on [W h_v || W h_u] (destination first), slope 0.2
        att = w.tensors["a"]
        o = w.out_dim
        logit = float(att[:o] @ linalg.matvec(w.tensors["W"], h_v)) + float(
            att[o:] @ linalg.matvec(w.tensors["W"], h_u)
        )
        if logit < 0.0:
            logit *= 0.2
        return math.exp(logit)

    return dict(
        layers=layers,
        ms_local=ms_local,
        f_nn=lambda w, h_u: linalg.matvec(w.tensors["W"], h_u),
        ms_cbn=lambda w, ctx, x: x / ctx,
        ms_cbn_inv=lambda w, ctx, x: x * ctx,
        update=lambda w, h_v, a_v: linalg.elu(a_v),
        agg_dims=tuple(dims[1:]),
        ctx_kind=CTX_SUM,
        dest_dependent=True,
        cbn_monotone="decreasing",
    )


def _build_ggcn(dims, rng, dtype, weights, _opt):
    if weights is None:
        layers = tuple(
            LayerWeights(
                i,
                o,
                {"W": _mat(rng, o, i, dtype), "Wg_src": _mat(rng, i, i, dtype), "Wg_dst": _mat(rng, i, i, dtype)},
            )
            for i, o in _layer_pairs(dims)
        )
    else:
        layers = _cast_layers(weights, dims, dtype)

    def ms_local(w, h_u, h_v, d):
        # edge gate from both endpoints, applied elementwise to the neighbor
        return linalg.sigmoid(
            linalg.matvec(w.tensors["Wg_src"], h_u) + linalg.matvec(w.tensors["Wg_dst"], h_v)
        )

    return dict(
        layers=layers,
        ms_local=ms_local,
        f_nn=lambda w, h_u: h_u,
        ms_cbn=lambda w, ctx, x: x,
        ms_cbn_inv=lambda w, ctx, x: x,
        update=lambda w, h_v, a_v: linalg.relu(linalg.matvec(w.tensors["W"], a_v)),
        agg_dims=tuple(dims[:-1]),
        ctx_kind=CTX_NONE,
        dest_dependent=True,
    )


def _build_agnn(dims, rng, dtype, weights, _opt):
    if weights is None:
        layers = tuple(
            LayerWeights(i, o, {"W": _mat(rng, o, i, dtype)}, {"beta": float(rng.uniform(0.5, 1.5))})
            for i, o in _layer_pairs(dims)
        )
    else:
        layers = _cast_layers(weights, dims, dtype)

    def ms_local(w, h_u, h_v, d):
        nu = float(np.linalg.norm(h_u))
        nv = float(np.linalg.norm(h_v))
        if nu == 0.0 or nv == 0.0:
            return 0.0  # cosine undefined at zero norm; contribute nothing
        return w.scalars["beta"] * float(h_v @ h_u) / (nu * nv)

    return dict(
        layers=layers,
        ms_local=ms_local,
        f_nn=lambda w, h_u: h_u,
        ms_cbn=lambda w, ctx, x: x,
        ms_cbn_inv=lambda w, ctx, x: x,
        update=lambda w, h_v, a_v: linalg.relu(linalg.matvec(w.tensors["W"], a_v)),
        agg_dims=tuple(dims[:-1]),
        ctx_kind=CTX_NONE,
        dest_dependent=True,
    )


_BUILDERS: dict[str, Callable] = {
    GCN: _build_gcn,
    GRAPHSAGE: _build_graphsage,
    PINSAGE: _build_pinsage,
    GIN: _build_gin,
    MONET: _build_monet,
    COMMNET: _build_commnet,
    GAT: _build_gat,
    GGCN: _build_ggcn,
    AGNN: _build_agnn,
}


def make_bundle(
    model: str,
    dims: Sequence[int],
    *,
    dtype: np.dtype = np.float64,
    rng_seed: int = 0,
    weights: Sequence[LayerWeights] | None = None,
    degree_smoothing: bool = True,
) -> OperatorBundle:
    """Build an operator bundle with fresh seeded weights or loaded ones.

    degree_smoothing applies to gcn only: it offsets both degree terms by one
    (self-loop style); raw degrees are used when False.
    """
    name = str(model).lower()
    builder = _BUILDERS.get(name)
    if builder is None:
        raise UnsupportedModel(f"unknown model {model!r}; known: {', '.join(MODELS)}")
    rng = np.random.default_rng(rng_seed)
    parts = builder(list(dims), rng, np.dtype(dtype), weights, degree_smoothing)
    return OperatorBundle(model=name, dtype=np.dtype(dtype), **parts)


def make_broken_mean_bundle(
    dims: Sequence[int], *, dtype: np.dtype = np.float64, rng_seed: int = 0
) -> OperatorBundle:
    """Mean aggregator whose incremental form is wrong on purpose.

    Batch aggregation is the arithmetic mean; the signed form folds each
    payload as (acc + payload) / 2, which only agrees for two inputs. The
    condition checker must flag it (condition 2).
    """
    rng = np.random.default_rng(rng_seed)
    layers = tuple(
        LayerWeights(i, o, {"W": _mat(rng, o, i, np.dtype(dtype))}) for i, o in _layer_pairs(dims)
    )

    def agg_full(w, payloads):
        if not payloads:
            return np.zeros(w.in_dim, dtype=dtype)
        return np.mean(np.stack(payloads), axis=0)

    def agg_partial(w, acc, contributions):
        out = np.asarray(acc, dtype=dtype).copy()
        for c in contributions:
            out = (out + c.sign * c.payload) / 2.0
        return out

    return OperatorBundle(
        model=BROKEN_MEAN,
        layers=layers,
        dtype=np.dtype(dtype),
        ms_local=lambda w, h_u, h_v, d: 1.0,
        f_nn=lambda w, h_u: h_u,
        ms_cbn=lambda w, ctx, x: x,
        ms_cbn_inv=lambda w, ctx, x: x,
        update=lambda w, h_v, a_v: linalg.relu(linalg.matvec(w.tensors["W"], a_v)),
        agg_dims=tuple(dims[:-1]),
        ctx_kind=CTX_NONE,
        agg_full=agg_full,
        agg_partial=agg_partial,
    )


# ---- canonical full-neighborhood evaluation ----


def vertex_aggregate(
    bundle: OperatorBundle,
    layer: int,
    graph: DynamicGraph,
    h_fn: Callable[[int], np.ndarray],
    v: int,
) -> tuple[np.ndarray, float]:
    """Aggregate and context for one destination over its full in-neighborhood.

    This is the single source of truth for "recompute vertex v at this layer":
    the full engine, the bootstrap, and the recompute paths of the incremental
    engines all route through it.
    """
    nbrs = graph.in_neighbors(v)
    if nbrs.size == 0:
        return bundle.empty_aggregate(layer), bundle.empty_context()
    h_v = h_fn(v) if bundle.dest_dependent else None
    hs = [h_fn(int(u)) for u in nbrs]
    msgs = [
        bundle.local_message(layer, h_u, h_v, graph.out_degree(int(u)))
        for u, h_u in zip(nbrs, hs)
    ]
    ctx = bundle.context_full(layer, msgs)
    pays = [
        make_payload(bundle.compose(layer, ctx, m), bundle.neighbor_transform(layer, h_u), bundle.dtype)
        for m, h_u in zip(msgs, hs)
    ]
    return bundle.combine_all(layer, pays), ctx


def layer_embeddings(
    bundle: OperatorBundle, layer: int, graph: DynamicGraph, H_prev: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One full layer pass: returns (H_next, aggregates, contexts)."""
    n = graph.num_vertices
    if H_prev.shape != (n, bundle.layers[layer].in_dim):
        raise ConfigError(f"layer {layer}: embeddings shape {H_prev.shape} unexpected")
    H_next = np.zeros((n, bundle.layers[layer].out_dim), dtype=bundle.dtype)
    A = np.zeros((n, bundle.agg_dim(layer)), dtype=bundle.dtype)
    C = np.zeros(n, dtype=np.float64)
    h_fn = lambda u: H_prev[u]  # noqa: E731
    for v in range(n):
        a, c = vertex_aggregate(bundle, layer, graph, h_fn, v)
        A[v] = a
        C[v] = c
        H_next[v] = bundle.apply_update(layer, H_prev[v], a)
    return H_next, A, C


def forward_layer_reference(
    bundle: OperatorBundle, graph: DynamicGraph, H_prev: np.ndarray, layer: int
) -> np.ndarray:
    """Reference evaluation of one layer for every vertex."""
    return layer_embeddings(bundle, layer, graph, H_prev)[0]


def reference_embeddings(bundle: OperatorBundle, graph: DynamicGraph, features: np.ndarray) -> np.ndarray:
    """Final-layer embeddings from scratch; the from-scratch oracle."""
    H = np.asarray(features, dtype=bundle.dtype)
    for layer in range(bundle.num_layers):
        H = forward_layer_reference(bundle, graph, H, layer)
    return H

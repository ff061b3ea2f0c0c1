"""Operator decomposition framework.

A GNN layer is decomposed into seven cooperating operators so that cached
aggregation state can be edited in place when edges appear or disappear:

- ms_local(h_u, h_v, src_degree): per-edge local coefficient, independent of
  the rest of the neighborhood (scalar or vector);
- nbr_ctx: a per-vertex reduction over all local coefficients (here one of
  "none" -> constant 1, "count" -> neighbor count, "sum" -> coefficient sum),
  supporting both batch evaluation and signed single-step updates;
- ms_cbn(ctx, x) and its inverse: blend the neighborhood context into a value
  and strip it back out;
- aggregate: commutative reduction of per-edge payloads, in batch form and in
  signed incremental form;
- f_nn(h_u): per-edge neighbor transform whose output is scaled by the
  combined message;
- update(h_v, a_v): produces the next-layer embedding from the aggregate.

An OperatorBundle packs these callables with per-layer weights and the flags
engines need to plan work (destination dependence, source-degree dependence).
The incremental engines are valid only when the bundle satisfies four
algebraic conditions; check_conditions probes them on randomized inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .errors import ConfigError, SingularContext

MessageValue = Union[float, np.ndarray]

CTX_NONE = "none"
CTX_COUNT = "count"
CTX_SUM = "sum"


@dataclass(frozen=True)
class LayerWeights:
    in_dim: int
    out_dim: int
    tensors: Mapping[str, np.ndarray] = field(default_factory=dict)
    scalars: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class SignedContribution:
    """One payload entering (+1) or leaving (-1) an aggregate."""

    sign: int
    payload: np.ndarray


def make_payload(message: MessageValue, transformed: MessageValue, dtype: np.dtype) -> np.ndarray:
    """Per-edge payload: combined message times transformed neighbor value."""
    return np.atleast_1d(np.asarray(np.multiply(message, transformed), dtype=dtype))


@dataclass(frozen=True)
class OperatorBundle:
    model: str
    layers: tuple[LayerWeights, ...]
    dtype: np.dtype
    ms_local: Callable[[LayerWeights, np.ndarray, np.ndarray | None, int], MessageValue]
    f_nn: Callable[[LayerWeights, np.ndarray], MessageValue]
    ms_cbn: Callable[[LayerWeights, float, np.ndarray], np.ndarray]
    ms_cbn_inv: Callable[[LayerWeights, float, np.ndarray], np.ndarray]
    update: Callable[[LayerWeights, np.ndarray, np.ndarray], np.ndarray]
    agg_dims: tuple[int, ...]
    ctx_kind: str = CTX_NONE
    dest_dependent: bool = False
    src_degree_dependent: bool = False
    cbn_monotone: str = "none"  # "decreasing" | "increasing" | "none"
    agg_full: Callable[[LayerWeights, Sequence[np.ndarray]], np.ndarray] | None = None
    agg_partial: Callable[[LayerWeights, np.ndarray, Sequence[SignedContribution]], np.ndarray] | None = None

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def has_nbr_ctx(self) -> bool:
        return self.ctx_kind != CTX_NONE

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple([self.layers[0].in_dim] + [w.out_dim for w in self.layers])

    def weights(self, layer: int) -> LayerWeights:
        return self.layers[layer]

    def agg_dim(self, layer: int) -> int:
        return self.agg_dims[layer]

    def empty_context(self) -> float:
        return 0.0 if self.has_nbr_ctx else 1.0

    def empty_aggregate(self, layer: int) -> np.ndarray:
        return np.zeros(self.agg_dims[layer], dtype=self.dtype)

    # ---- operator application ----

    def local_message(self, layer: int, h_u: np.ndarray, h_v: np.ndarray | None, src_degree: int) -> MessageValue:
        return self.ms_local(self.layers[layer], h_u, h_v, src_degree)

    def neighbor_transform(self, layer: int, h_u: np.ndarray) -> MessageValue:
        return self.f_nn(self.layers[layer], h_u)

    def context_full(self, layer: int, messages: Sequence[MessageValue]) -> float:
        if self.ctx_kind == CTX_COUNT:
            return float(len(messages))
        if self.ctx_kind == CTX_SUM:
            acc = 0.0
            for m in messages:
                acc += float(m)
            return acc
        return 1.0

    def context_update(
        self, layer: int, ctx: float, signed_messages: Sequence[tuple[int, MessageValue]]
    ) -> float:
        if self.ctx_kind == CTX_COUNT:
            return float(ctx) + float(sum(s for s, _ in signed_messages))
        if self.ctx_kind == CTX_SUM:
            acc = float(ctx)
            for s, m in signed_messages:
                acc += s * float(m)
            return acc
        return 1.0

    def compose(self, layer: int, ctx: float, value: np.ndarray) -> np.ndarray:
        """Blend the neighborhood context into a message or aggregate."""
        try:
            with np.errstate(all="ignore"):
                out = self.ms_cbn(self.layers[layer], float(ctx), value)
        except ZeroDivisionError as exc:
            raise SingularContext(f"{self.model}: context {ctx} not composable") from exc
        if not np.all(np.isfinite(out)):
            raise SingularContext(f"{self.model}: context {ctx} not composable")
        return out

    def strip(self, layer: int, ctx: float, value: np.ndarray) -> np.ndarray:
        """Inverse of compose for the same context."""
        try:
            with np.errstate(all="ignore"):
                out = self.ms_cbn_inv(self.layers[layer], float(ctx), value)
        except ZeroDivisionError as exc:
            raise SingularContext(f"{self.model}: context {ctx} not invertible") from exc
        if not np.all(np.isfinite(out)):
            raise SingularContext(f"{self.model}: context {ctx} not invertible")
        return out

    def combine_all(self, layer: int, payloads: Sequence[np.ndarray]) -> np.ndarray:
        if self.agg_full is not None:
            return self.agg_full(self.layers[layer], payloads)
        if not payloads:
            return self.empty_aggregate(layer)
        acc = payloads[0].astype(self.dtype, copy=True)
        for p in payloads[1:]:
            acc += p
        return acc

    def combine_signed(
        self, layer: int, acc: np.ndarray, contributions: Sequence[SignedContribution]
    ) -> np.ndarray:
        if self.agg_partial is not None:
            return self.agg_partial(self.layers[layer], acc, contributions)
        out = np.asarray(acc, dtype=self.dtype).copy()
        for c in contributions:
            if c.sign > 0:
                out += c.payload
            else:
                out -= c.payload
        return out

    def apply_update(self, layer: int, h_v: np.ndarray, a_v: np.ndarray) -> np.ndarray:
        return self.update(self.layers[layer], h_v, a_v)


# ---- spec'd free-function forms ----


def compose_message(bundle: OperatorBundle, layer: int, ctx: float, value: np.ndarray) -> np.ndarray:
    return bundle.compose(layer, ctx, value)


def invert_context(bundle: OperatorBundle, layer: int, ctx: float, value: np.ndarray) -> np.ndarray:
    return bundle.strip(layer, ctx, value)


# ---- incremental-validity conditions ----


@dataclass(frozen=True)
class ConditionCheck:
    condition: int
    description: str
    max_violation: float
    passed: bool
    note: str = ""


@dataclass(frozen=True)
class ConditionReport:
    model: str
    trials: int
    tol: float
    rng_seed: int
    checks: tuple[ConditionCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        lines = [f"{self.model}: trials={self.trials} tol={self.tol:g}"]
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            line = f"  ({c.condition}) {c.description}: {status} (max violation {c.max_violation:.3e})"
            if c.note:
                line += f" [{c.note}]"
            lines.append(line)
        return "\n".join(lines)


def _maxdiff(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))))


def check_conditions(
    bundle: OperatorBundle,
    trials: int = 1000,
    tol: float = 1e-9,
    rng_seed: int = 0,
    layer: int = 0,
) -> ConditionReport:
    """Probe the four algebraic conditions the incremental engines rely on.

    (1) the context reduction can be updated one message at a time,
    (2) the aggregate can be updated one signed payload at a time,
    (3) context blending distributes over aggregation,
    (4) blending is invertible for a fixed context (round-trip), and strictly
        monotone in the context when the bundle declares a direction.

    Inputs are drawn through the bundle's own operators so values live in the
    distributions the model actually produces.
    """
    rng = np.random.default_rng(rng_seed)
    in_dim = bundle.layers[layer].in_dim
    v1 = v2 = v3 = v4 = 0.0
    note2 = note4 = ""

    # canonical incremental-aggregation probe: payloads [1], [2], [3]
    probe = [np.array([1.0]), np.array([2.0]), np.array([3.0])]
    full = bundle.combine_all(layer, probe)
    inc = bundle.combine_signed(
        layer, bundle.combine_all(layer, probe[:1]), [SignedContribution(1, p) for p in probe[1:]]
    )
    d = _maxdiff(full, inc)
    if d > v2:
        v2 = d
        if d > tol:
            note2 = (
                f"counterexample payloads [1],[2],[3]: batch={float(np.ravel(full)[0]):g} "
                f"incremental={float(np.ravel(inc)[0]):g}"
            )

    for _ in range(trials):
        k = int(rng.integers(2, 12))
        hs = rng.uniform(-1.0, 1.0, (k, in_dim)).astype(bundle.dtype)
        h_v = rng.uniform(-1.0, 1.0, in_dim).astype(bundle.dtype)
        degs = rng.integers(1, 11, k)
        msgs = [bundle.local_message(layer, hs[i], h_v, int(degs[i])) for i in range(k)]
        pays = [
            make_payload(m, bundle.neighbor_transform(layer, hs[i]), bundle.dtype)
            for i, m in enumerate(msgs)
        ]
        split = int(rng.integers(1, k))

        ctx_all = bundle.context_full(layer, msgs)
        ctx_inc = bundle.context_update(
            layer, bundle.context_full(layer, msgs[:split]), [(1, m) for m in msgs[split:]]
        )
        v1 = max(v1, abs(ctx_all - ctx_inc))

        agg_all = bundle.combine_all(layer, pays)
        agg_inc = bundle.combine_signed(
            layer,
            bundle.combine_all(layer, pays[:split]),
            [SignedContribution(1, p) for p in pays[split:]],
        )
        v2 = max(v2, _maxdiff(agg_all, agg_inc))

        lhs = bundle.combine_all(layer, [bundle.compose(layer, ctx_all, p) for p in pays])
        rhs = bundle.compose(layer, ctx_all, bundle.combine_all(layer, pays))
        v3 = max(v3, _maxdiff(lhs, rhs))

        v4 = max(v4, _maxdiff(bundle.strip(layer, ctx_all, bundle.compose(layer, ctx_all, pays[0])), pays[0]))
        if bundle.cbn_monotone in ("decreasing", "increasing"):
            if bundle.ctx_kind == CTX_COUNT:
                z1, z2 = sorted(rng.choice(np.arange(1, 41), size=2, replace=False).tolist())
            else:
                z1, z2 = sorted(rng.uniform(0.1, 20.0, 2).tolist())
            m = np.array([float(rng.uniform(0.1, 2.0))])
            c1 = float(bundle.compose(layer, float(z1), m)[0])
            c2 = float(bundle.compose(layer, float(z2), m)[0])
            gap = (c2 - c1) if bundle.cbn_monotone == "decreasing" else (c1 - c2)
            if gap > v4:
                v4 = gap
                note4 = f"monotonicity violated between contexts {z1:g} and {z2:g}"

    checks = (
        ConditionCheck(1, "incremental context equals batch recomputation", v1, v1 <= tol),
        ConditionCheck(2, "incremental aggregation equals batch recomputation", v2, v2 <= tol, note2),
        ConditionCheck(3, "context blending distributes over aggregation", v3, v3 <= tol),
        ConditionCheck(4, "context blending invertible / monotone as declared", v4, v4 <= tol, note4),
    )
    return ConditionReport(bundle.model, trials, tol, rng_seed, checks)


# ---- weights file: JSON, one entry per layer ----
#
# {"model": ..., "layers": [{"dims": [in, out], "W": [[...]] | null,
#   "a": [...] | null, "extra": {name: [[...]]}, "scalars": {...}}]}
# "W" is the primary update matrix, "a" the attention vector where the model
# has one; any further tensors ride in "extra".


def save_weights(bundle: OperatorBundle, path: str) -> None:
    layers = []
    for w in bundle.layers:
        tensors = dict(w.tensors)
        entry = {
            "dims": [w.in_dim, w.out_dim],
            "W": tensors.pop("W").tolist() if "W" in tensors else None,
            "a": tensors.pop("a").tolist() if "a" in tensors else None,
            "extra": {name: t.tolist() for name, t in sorted(tensors.items())},
            "scalars": {name: float(v) for name, v in sorted(w.scalars.items())},
        }
        layers.append(entry)
    with open(path, "w", encoding="ascii") as fh:
        json.dump({"model": bundle.model, "layers": layers}, fh, indent=1)
        fh.write("\n")


def load_weights(path: str) -> dict:
    """Read a weights file into {"model": str, "layers": [LayerWeights, ...]}."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read weights file {path}: {exc}") from exc
    if not isinstance(data, dict) or "model" not in data or "layers" not in data:
        raise ConfigError(f"{path}: weights file needs 'model' and 'layers'")
    layers: list[LayerWeights] = []
    prev_out: int | None = None
    for i, entry in enumerate(data["layers"]):
        dims = entry.get("dims")
        if not (isinstance(dims, list) and len(dims) == 2):
            raise ConfigError(f"{path}: layer {i} missing dims")
        d_in, d_out = int(dims[0]), int(dims[1])
        if prev_out is not None and d_in != prev_out:
            raise ConfigError(f"{path}: layer {i} input dim {d_in} breaks the chain from {prev_out}")
        prev_out = d_out
        tensors: dict[str, np.ndarray] = {}
        if entry.get("W") is not None:
            tensors["W"] = np.asarray(entry["W"], dtype=np.float64)
        if entry.get("a") is not None:
            tensors["a"] = np.asarray(entry["a"], dtype=np.float64)
        for name, t in (entry.get("extra") or {}).items():
            tensors[name] = np.asarray(t, dtype=np.float64)
        scalars = {name: float(v) for name, v in (entry.get("scalars") or {}).items()}
        layers.append(LayerWeights(d_in, d_out, tensors, scalars))
    return {"model": str(data["model"]), "layers": layers}

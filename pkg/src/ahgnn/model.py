"""Adaptive hop mixing over meta-paths plus coarse-to-fine semantic fusion.

Per meta-path, precomputed hop messages are projected into a shared
hidden space and mixed with learnable hop weights gamma (initialized to
a decaying convex profile, which is provably low-pass; see spectral).
Projections are keyed by type prefix, so paths sharing a prefix share
those projection layers.  The per-path embeddings become a token
sequence fused in two rounds of multi-head attention: a coarse round
whose averaged attention mass yields per-token influence factors, and a
fine round over influence-scaled tokens; a sigmoid-gated sum of the two,
mean-pooled and row-normalized, feeds a linear classifier.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .propagate import MessageCache, label_hop_indices

CHECKPOINT_MAGIC = b"AHGM"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for unreadable or mismatched checkpoint files."""


def init_gamma(alpha: float, hops: int) -> np.ndarray:
    """Decaying hop-weight profile alpha(1-alpha)^l, tail mass on the last hop.

    The returned vector has hops+1 entries, all positive, summing to 1.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    if hops < 0:
        raise ValueError("hops must be >= 0")
    g = np.array([alpha * (1.0 - alpha) ** l for l in range(hops)]
                 + [(1.0 - alpha) ** hops], dtype=np.float64)
    return g


@dataclass
class LinearParams:
    w: Tensor
    b: Tensor


@dataclass
class AttentionParams:
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor


@dataclass
class ModelParams:
    hidden: int
    heads: int
    gamma: dict[str, Tensor]
    feature_projections: dict[str, LinearParams]
    label_gamma: dict[str, Tensor]
    label_projections: dict[tuple[str, int], LinearParams]
    coarse: AttentionParams
    fine: AttentionParams
    gate: Tensor
    classifier: LinearParams

    def all_parameters(self) -> dict[str, Tensor]:
        """Flat name -> Tensor map with stable, checkpointable names."""
        out: dict[str, Tensor] = {}
        for k in sorted(self.gamma):
            out[f"gamma.{k}"] = self.gamma[k]
        for k in sorted(self.feature_projections):
            out[f"fproj.{k}.w"] = self.feature_projections[k].w
            out[f"fproj.{k}.b"] = self.feature_projections[k].b
        for k in sorted(self.label_gamma):
            out[f"lgamma.{k}"] = self.label_gamma[k]
        for k, hop in sorted(self.label_projections):
            out[f"lproj.{k}.{hop}.w"] = self.label_projections[(k, hop)].w
            out[f"lproj.{k}.{hop}.b"] = self.label_projections[(k, hop)].b
        for side, att in (("coarse", self.coarse), ("fine", self.fine)):
            out[f"{side}.wq"] = att.wq
            out[f"{side}.wk"] = att.wk
            out[f"{side}.wv"] = att.wv
            out[f"{side}.wo"] = att.wo
        out["gate"] = self.gate
        out["cls.w"] = self.classifier.w
        out["cls.b"] = self.classifier.b
        return out


def _glorot(rng, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


def _linear(rng, fan_in: int, fan_out: int, dtype, name: str) -> LinearParams:
    return LinearParams(
        w=Tensor(_glorot(rng, fan_in, fan_out, dtype), requires_grad=True,
                 name=f"{name}.w"),
        b=Tensor(np.zeros(fan_out, dtype=dtype), requires_grad=True,
                 name=f"{name}.b"),
    )


def init_model_params(cache: MessageCache, hidden: int, heads: int,
                      alpha: float, rng, dtype=np.float32,
                      fix_gamma: bool = False) -> ModelParams:
    """Fresh parameters sized to a message cache.

    With fix_gamma, every hop weight is pinned at 1.0 and excluded from
    gradient updates (the non-adaptive ablation).
    """
    if hidden < 1 or heads < 1 or hidden % heads != 0:
        raise ValueError(f"hidden ({hidden}) must be a positive multiple of "
                         f"heads ({heads})")
    target = cache.target_type

    gamma: dict[str, Tensor] = {}
    prefix_dims: dict[str, int] = {}
    for key in sorted(cache.feature_entries):
        hops = cache.feature_entries[key]
        steps = len(hops) - 1
        init = np.ones(steps + 1) if fix_gamma else init_gamma(alpha, steps)
        gamma[key] = Tensor(init.astype(dtype), requires_grad=not fix_gamma,
                            name=f"gamma.{key}")
        types = key.split("-")
        for l, h in enumerate(hops):
            prefix = "-".join(types[: l + 1])
            prefix_dims.setdefault(prefix, h.shape[1])

    fproj = {p: _linear(rng, prefix_dims[p], hidden, dtype, f"fproj.{p}")
             for p in sorted(prefix_dims)}

    label_gamma: dict[str, Tensor] = {}
    lproj: dict[tuple[str, int], LinearParams] = {}
    for key in sorted(cache.label_entries):
        hops = cache.label_entries[key]
        init = np.ones(len(hops)) if fix_gamma else init_gamma(alpha, len(hops) - 1)
        label_gamma[key] = Tensor(init.astype(dtype),
                                  requires_grad=not fix_gamma,
                                  name=f"lgamma.{key}")
        for j, hop in enumerate(label_hop_indices(key, target)):
            lproj[(key, hop)] = _linear(rng, hops[j].shape[1], hidden, dtype,
                                        f"lproj.{key}.{hop}")

    num_classes = cache.num_classes if cache.label_entries else \
        next(iter(cache.feature_entries.values()))[0].shape[1]
    return ModelParams(
        hidden=hidden, heads=heads, gamma=gamma, feature_projections=fproj,
        label_gamma=label_gamma, label_projections=lproj,
        coarse=AttentionParams(*(Tensor(_glorot(rng, hidden, hidden, dtype),
                                        requires_grad=True, name=f"coarse.{nm}")
                                 for nm in ("wq", "wk", "wv", "wo"))),
        fine=AttentionParams(*(Tensor(_glorot(rng, hidden, hidden, dtype),
                                      requires_grad=True, name=f"fine.{nm}")
                               for nm in ("wq", "wk", "wv", "wo"))),
        gate=Tensor(np.zeros((), dtype=dtype), requires_grad=True, name="gate"),
        classifier=_linear(rng, hidden, num_classes, dtype, "cls"),
    )


def path_embeddings(cache: MessageCache,
                    params: ModelParams) -> tuple[list[str], list[Tensor]]:
    """Gamma-weighted sums of projected hop messages, one (N, d) per path.

    Feature paths come first (sorted), then label paths (sorted, keys
    suffixed ':label').
    """
    target = cache.target_type
    keys: list[str] = []
    embs: list[Tensor] = []
    for key in sorted(cache.feature_entries):
        types = key.split("-")
        g = params.gamma[key]
        acc = None
        for l, s in enumerate(cache.feature_entries[key]):
            lin = params.feature_projections["-".join(types[: l + 1])]
            proj = ad.add(ad.matmul(ad.constant(s), lin.w), lin.b)
            term = ad.mul(proj, ad.index1d(g, l))
            acc = term if acc is None else ad.add(acc, term)
        keys.append(key)
        embs.append(acc)
    for key in sorted(cache.label_entries):
        g = params.label_gamma[key]
        acc = None
        for j, hop in enumerate(label_hop_indices(key, target)):
            lin = params.label_projections[(key, hop)]
            s = cache.label_entries[key][j]
            proj = ad.add(ad.matmul(ad.constant(s), lin.w), lin.b)
            term = ad.mul(proj, ad.index1d(g, j))
            acc = term if acc is None else ad.add(acc, term)
        keys.append(f"{key}:label")
        embs.append(acc)
    return keys, embs


def assemble_tokens(embs: list[Tensor]) -> Tensor:
    """Stack per-path embeddings into an (N, S, d) token tensor."""
    return ad.concat([ad.unsqueeze(e, 1) for e in embs], axis=1)


def multi_head_attention(tokens: Tensor, attn: AttentionParams,
                         heads: int) -> tuple[Tensor, list[Tensor]]:
    """Scaled dot-product attention over the token axis.

    Returns the output tensor (N, S, d) and the per-head attention maps
    (N, S, S).  No residual connection, no layer normalization.
    """
    d = tokens.shape[-1]
    if d % heads != 0:
        raise ValueError("token width must be divisible by the head count")
    dh = d // heads
    q = ad.matmul(tokens, attn.wq)
    k = ad.matmul(tokens, attn.wk)
    v = ad.matmul(tokens, attn.wv)
    outs, atts = [], []
    for h in range(heads):
        lo, hi = h * dh, (h + 1) * dh
        scores = ad.scale(
            ad.matmul(ad.slice_last(q, lo, hi), ad.transpose(ad.slice_last(k, lo, hi))),
            1.0 / np.sqrt(dh))
        if not np.all(np.isfinite(scores.data)):
            raise FloatingPointError("non-finite attention logits")
        att = ad.row_softmax(scores)
        atts.append(att)
        outs.append(ad.matmul(att, ad.slice_last(v, lo, hi)))
    return ad.matmul(ad.concat(outs, axis=-1), attn.wo), atts


def influence_factors(atts: list[Tensor]) -> Tensor:
    """Mean attention mass received by each token, (N, S), rows sum to 1."""
    acc = None
    for att in atts:
        m = ad.mean_axis(att, axis=1)  # average over query positions
        acc = m if acc is None else ad.add(acc, m)
    return ad.scale(acc, 1.0 / len(atts))


@dataclass
class ModelOutput:
    logits: Tensor
    token_keys: list[str]
    beta: Tensor
    coarse_attention: list[Tensor]
    fine_attention: list[Tensor]


def model_forward(cache: MessageCache, params: ModelParams) -> ModelOutput:
    """Full forward pass over every target node in the cache."""
    keys, embs = path_embeddings(cache, params)
    tokens = assemble_tokens(embs)
    coarse_out, coarse_atts = multi_head_attention(tokens, params.coarse,
                                                   params.heads)
    beta = influence_factors(coarse_atts)
    scaled = ad.mul(tokens, ad.unsqueeze(beta, 2))
    fine_out, fine_atts = multi_head_attention(scaled, params.fine, params.heads)
    a = ad.sigmoid(params.gate)
    fused = ad.add(ad.mul(coarse_out, a),
                   ad.mul(fine_out, ad.add_const(ad.scale(a, -1.0), 1.0)))
    pooled = ad.mean_axis(fused, axis=1)
    normed = ad.l2_normalize_rows(pooled)
    logits = ad.add(ad.matmul(normed, params.classifier.w), params.classifier.b)
    return ModelOutput(logits=logits, token_keys=keys, beta=beta,
                       coarse_attention=coarse_atts, fine_attention=fine_atts)


def predict_logits(cache: MessageCache, params: ModelParams,
                   batch_size: int | None = None) -> np.ndarray:
    """Forward pass without recording gradients, optionally in row chunks."""
    n = cache.n_target
    if batch_size is None or batch_size >= n:
        return model_forward(cache, params).logits.data.copy()
    parts = []
    for lo in range(0, n, batch_size):
        idx = np.arange(lo, min(lo + batch_size, n))
        parts.append(model_forward(cache.take_rows(idx), params).logits.data)
    return np.concatenate(parts, axis=0)


def gamma_table(params: ModelParams) -> list[tuple[str, int, float]]:
    """(path, hop, weight) rows; label paths carry a ':label' suffix."""
    rows = []
    for key in sorted(params.gamma):
        for l, v in enumerate(params.gamma[key].data):
            rows.append((key, l, float(v)))
    for key in sorted(params.label_gamma):
        hops = label_hop_indices(key, key.split("-")[0])
        for j, v in enumerate(params.label_gamma[key].data):
            rows.append((f"{key}:label", hops[j], float(v)))
    return rows


def beta_table(output: ModelOutput) -> list[tuple[str, float]]:
    """Node-averaged influence factor per token."""
    avg = output.beta.data.mean(axis=0)
    return list(zip(output.token_keys, (float(x) for x in avg)))


def save_checkpoint(params: ModelParams, config: dict, path) -> None:
    """Write parameters and a config echo to the binary checkpoint format."""
    tensors = params.all_parameters()
    cfg = json.dumps(config, sort_keys=True).encode()
    with open(Path(path), "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, len(cfg)))
        f.write(cfg)
        f.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            # asarray keeps 0-d shapes; ascontiguousarray would promote to 1-d
            arr = np.asarray(tensors[name].data, dtype="<f4", order="C")
            nb = name.encode()
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint file {path} not found")
    data = path.read_bytes()
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise CheckpointError(f"checkpoint {path.name} is truncated")
        out = data[pos:pos + n]
        pos += n
        return out

    if take(4) != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path.name} is not a model checkpoint (bad magic)")
    version, cfg_len = struct.unpack("<II", take(8))
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    config = json.loads(take(cfg_len).decode())
    (n_params,) = struct.unpack("<I", take(4))
    arrays: dict[str, np.ndarray] = {}
    for _ in range(n_params):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode()
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(take(4 * count), dtype="<f4")
        arrays[name] = arr.reshape(shape).astype(np.float32)
    if pos != len(data):
        raise CheckpointError(f"checkpoint {path.name} has trailing bytes")
    return config, arrays


def restore_model_params(arrays: dict[str, np.ndarray], cache: MessageCache,
                         config: dict, dtype=np.float32) -> ModelParams:
    """Rebuild ModelParams from checkpoint arrays against a cache.

    The checkpoint's parameter names must match the cache's path set
    exactly; a mismatch means the checkpoint belongs to another dataset
    or propagation depth.
    """
    params = init_model_params(
        cache, hidden=int(config["hidden"]), heads=int(config["heads"]),
        alpha=float(config.get("alpha", 0.25)), rng=np.random.default_rng(0),
        dtype=dtype, fix_gamma=bool(config.get("fix_gamma_uniform", False)))
    expected = params.all_parameters()
    if set(expected) != set(arrays):
        missing = sorted(set(expected) - set(arrays))[:3]
        extra = sorted(set(arrays) - set(expected))[:3]
        raise CheckpointError(
            f"checkpoint parameters do not match this cache's meta-path set "
            f"(missing {missing}, unexpected {extra})")
    for name, t in expected.items():
        if tuple(arrays[name].shape) != tuple(t.data.shape):
            raise CheckpointError(
                f"checkpoint parameter {name} has shape {arrays[name].shape}, "
                f"expected {t.data.shape}")
        t.data = arrays[name].astype(dtype)
    return params

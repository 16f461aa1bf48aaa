"""Decoder-only transformer over continuous output tokens.

The model maps a prompt of past outputs y_0..y_t (vectors, not discrete
tokens) to a prediction of the next output at every position: a learned
linear projection embeds each output, pre-layer-norm GPT-2-style blocks
with causal attention mix the sequence, and a linear head reads the
prediction off each position. Forward is a pure function of (weights,
prompt); training records it on an engine Graph, inference runs eagerly.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field, asdict

import numpy as np

from . import engine
from .engine import Graph, Tensor

__all__ = [
    "ModelConfig", "TransformerWeights", "CheckpointError",
    "init_weights", "zero_weights", "forward", "predict_next",
    "predict_sequence", "make_tokens",
    "save_checkpoint", "load_checkpoint", "inspect_checkpoint",
    "write_tensor_file", "read_tensor_file",
]

NEG_INF = -1e30
DTYPES = {"f32": np.float32, "f64": np.float64}


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 4
    heads: int = 4
    embed_dim: int = 64
    context: int = 128
    token_dim: int = 5           # width of one prompt entry (y, or y + u)
    output_dim: int = 5          # width of the predicted output
    precision: str = "f32"
    input_scale: float = 1.0     # conditioning only; forward stays in raw units

    def __post_init__(self):
        if self.embed_dim % self.heads != 0:
            raise ValueError("embed_dim must be divisible by heads")
        if self.precision not in DTYPES:
            raise ValueError(f"precision must be one of {sorted(DTYPES)}")
        if min(self.layers, self.heads, self.context, self.token_dim,
               self.output_dim) < 1:
            raise ValueError("all dimensions must be >= 1")

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads

    @property
    def dtype(self):
        return DTYPES[self.precision]


@dataclass
class TransformerWeights:
    config: ModelConfig
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    def param_count(self) -> int:
        return sum(a.size for a in self.arrays.values())

    def astype(self, precision: str) -> "TransformerWeights":
        cfg = ModelConfig(**{**asdict(self.config), "precision": precision})
        dt = cfg.dtype
        return TransformerWeights(cfg, {k: v.astype(dt) for k, v in self.arrays.items()})

    def copy(self) -> "TransformerWeights":
        return TransformerWeights(self.config, {k: v.copy() for k, v in self.arrays.items()})


def _layout(cfg: ModelConfig):
    """Ordered (name, shape, init kind) triples; the checkpoint tensor
    directory and the init draw order both follow this order."""
    d, td, od = cfg.embed_dim, cfg.token_dim, cfg.output_dim
    out = [("embed.w", (td, d), "normal"), ("embed.b", (d,), "zeros"),
           ("pos", (cfg.context, d), "normal")]
    for i in range(cfg.layers):
        p = f"h{i}."
        out += [
            (p + "ln1.g", (d,), "ones"), (p + "ln1.b", (d,), "zeros"),
            (p + "attn.wq", (d, d), "normal"), (p + "attn.bq", (d,), "zeros"),
            (p + "attn.wk", (d, d), "normal"), (p + "attn.bk", (d,), "zeros"),
            (p + "attn.wv", (d, d), "normal"), (p + "attn.bv", (d,), "zeros"),
            (p + "attn.wo", (d, d), "normal"), (p + "attn.bo", (d,), "zeros"),
            (p + "ln2.g", (d,), "ones"), (p + "ln2.b", (d,), "zeros"),
            (p + "mlp.w1", (d, 4 * d), "normal"), (p + "mlp.b1", (4 * d,), "zeros"),
            (p + "mlp.w2", (4 * d, d), "normal"), (p + "mlp.b2", (d,), "zeros"),
        ]
    out += [("final.g", (d,), "ones"), ("final.b", (d,), "zeros"),
            ("head.w", (d, od), "normal"), ("head.b", (od,), "zeros")]
    return out


INIT_STD = 0.02


def init_weights(cfg: ModelConfig, rng) -> TransformerWeights:
    """Gaussian(0, 0.02) weight matrices and positional embeddings, zero
    biases, unit layer-norm gains."""
    arrays = {}
    for name, shape, kind in _layout(cfg):
        if kind == "normal":
            arr = INIT_STD * rng.standard_normal(shape)
        elif kind == "ones":
            arr = np.ones(shape)
        else:
            arr = np.zeros(shape)
        arrays[name] = arr.astype(cfg.dtype)
    return TransformerWeights(cfg, arrays)


def zero_weights(cfg: ModelConfig) -> TransformerWeights:
    """All-zero parameters (test hook: forward must output zeros)."""
    return TransformerWeights(
        cfg, {name: np.zeros(shape, dtype=cfg.dtype) for name, shape, _ in _layout(cfg)}
    )


# ---------------------------------------------------------------------------
# forward
# ---------------------------------------------------------------------------

_mask_cache: dict[tuple, np.ndarray] = {}


def _causal_mask(t, dtype) -> np.ndarray:
    key = (t, np.dtype(dtype).str)
    m = _mask_cache.get(key)
    if m is None:
        m = np.triu(np.full((t, t), NEG_INF, dtype=dtype), k=1)[None, None]
        _mask_cache[key] = m
    return m


def _linear(x: Tensor, w: Tensor, b: Tensor, bt, t, dout) -> Tensor:
    flat = engine.reshape(x, (bt, x.shape[-1]))
    y = engine.add(engine.matmul(flat, w), b)
    return engine.reshape(y, (bt // t, t, dout))


def make_tokens(ys, us=None) -> np.ndarray:
    """Assemble prompt entries; inputs, when the system has them, are
    concatenated onto the outputs position by position."""
    ys = np.asarray(ys)
    if us is None:
        return ys
    us = np.asarray(us)
    if us.ndim != ys.ndim:
        raise ValueError("inputs must have the same rank as outputs")
    return np.concatenate([ys, us[..., : ys.shape[-2], :]], axis=-1)


def forward(weights: TransformerWeights, tokens, graph: Graph | None = None):
    """Predictions at every position; the entry at position j is the model's
    estimate of y_{j+1} given tokens 0..j (the causal mask enforces this).

    tokens: (T, token_dim) or (B, T, token_dim). Returns a Tensor shaped
    (B, T, output_dim) (leading batch dim squeezed for 2-D input). When a
    graph is given, parameters are registered as named leaves on it.
    """
    cfg = weights.config
    toks = np.asarray(tokens, dtype=cfg.dtype)
    single = toks.ndim == 2
    if single:
        toks = toks[None]
    b, t, td = toks.shape
    if td != cfg.token_dim:
        raise ValueError(f"token dim {td} != configured {cfg.token_dim}")
    if t > cfg.context:
        raise ValueError(f"prompt length {t} exceeds context {cfg.context}")
    if t < 1:
        raise ValueError("empty prompt")
    if cfg.input_scale != 1.0:
        toks = toks * cfg.dtype(cfg.input_scale)

    if graph is not None:
        prm = {}
        for name, arr in weights.arrays.items():
            leaf = graph.params.get(name)
            prm[name] = leaf if leaf is not None else graph.leaf(arr, name)
    else:
        prm = {name: Tensor(arr) for name, arr in weights.arrays.items()}

    d, nh, dh = cfg.embed_dim, cfg.heads, cfg.head_dim
    bt = b * t
    inv_sqrt_dh = 1.0 / np.sqrt(dh)
    mask = _causal_mask(t, cfg.dtype)

    x = _linear(Tensor(toks), prm["embed.w"], prm["embed.b"], bt, t, d)
    if graph is not None:
        x = engine.add(x, _pos_slice(prm["pos"], t))
    else:
        x = engine.add(x, Tensor(prm["pos"].data[:t]))

    for i in range(cfg.layers):
        p = f"h{i}."
        h = engine.layer_norm(x, prm[p + "ln1.g"], prm[p + "ln1.b"])
        q = _heads(_linear(h, prm[p + "attn.wq"], prm[p + "attn.bq"], bt, t, d), b, t, nh, dh)
        k = _heads(_linear(h, prm[p + "attn.wk"], prm[p + "attn.bk"], bt, t, d), b, t, nh, dh)
        v = _heads(_linear(h, prm[p + "attn.wv"], prm[p + "attn.bv"], bt, t, d), b, t, nh, dh)
        scores = engine.scale(engine.matmul(q, engine.transpose(k, (0, 1, 3, 2))), inv_sqrt_dh)
        attn = engine.rowwise_softmax(engine.add(scores, Tensor(mask)))
        av = engine.reshape(engine.transpose(engine.matmul(attn, v), (0, 2, 1, 3)), (b, t, d))
        x = engine.add(x, _linear(av, prm[p + "attn.wo"], prm[p + "attn.bo"], bt, t, d))
        h2 = engine.layer_norm(x, prm[p + "ln2.g"], prm[p + "ln2.b"])
        inner = engine.gelu(_linear(h2, prm[p + "mlp.w1"], prm[p + "mlp.b1"], bt, t, 4 * d))
        x = engine.add(x, _linear(inner, prm[p + "mlp.w2"], prm[p + "mlp.b2"], bt, t, d))

    x = engine.layer_norm(x, prm["final.g"], prm["final.b"])
    out = _linear(x, prm["head.w"], prm["head.b"], bt, t, cfg.output_dim)
    if cfg.input_scale != 1.0:
        out = engine.scale(out, 1.0 / cfg.input_scale)
    if single:
        out = engine.reshape(out, (t, cfg.output_dim))
    return out


def _heads(x: Tensor, b, t, nh, dh) -> Tensor:
    return engine.transpose(engine.reshape(x, (b, t, nh, dh)), (0, 2, 1, 3))


def _pos_slice(pos: Tensor, t: int) -> Tensor:
    """First t rows of the positional table as a graph op (gradient scatters
    back into the full table)."""
    full = pos.data

    def mk():
        def grad(g):
            gp = np.zeros_like(full)
            gp[:t] = g.sum(axis=0) if g.ndim == 3 else g
            return (gp,)

        return grad

    return engine._emit("pos_slice", full[:t][None], (pos,), mk)


def predict_next(weights: TransformerWeights, ys, us=None) -> np.ndarray:
    """Next-output prediction from the prompt y_0..y_t: the last row of the
    all-positions forward pass."""
    ys = np.asarray(ys)
    if ys.ndim != 2 or ys.shape[0] < 1:
        raise ValueError("prompt must be a non-empty (t+1, m) array")
    return forward(weights, make_tokens(ys, us)).data[-1]


def predict_sequence(weights: TransformerWeights, ys, us=None) -> np.ndarray:
    """All next-output predictions for one or a batch of trajectories
    (row j predicts y_{j+1}); equivalent to stepping position by position
    thanks to the causal mask, in a single forward pass."""
    return forward(weights, make_tokens(ys, us)).data


# ---------------------------------------------------------------------------
# checkpoint container: JSON header + NUL + little-endian blob + CRC32
# ---------------------------------------------------------------------------

class CheckpointError(RuntimeError):
    pass


def write_tensor_file(path, meta: dict, tensors: dict[str, np.ndarray],
                      precision: str) -> None:
    dt = np.dtype(DTYPES[precision]).newbyteorder("<")
    directory = []
    blobs = []
    offset = 0
    for name, arr in tensors.items():
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"non-finite values in tensor {name!r}")
        raw = np.ascontiguousarray(arr, dtype=dt).tobytes()
        directory.append({"name": name, "shape": list(arr.shape),
                          "offset": offset, "precision": precision})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"format": "moplab-tensors-v1", "meta": meta,
                         "tensors": directory}).encode("utf-8")
    blob = b"".join(blobs)
    crc = zlib.crc32(blob) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(b"\0")
        fh.write(blob)
        fh.write(crc.to_bytes(4, "little"))


def _read_header(data: bytes) -> tuple[dict, int]:
    sep = data.find(b"\0")
    if sep < 0:
        raise CheckpointError("missing header separator")
    try:
        header = json.loads(data[:sep].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt header: {exc}") from exc
    if header.get("format") != "moplab-tensors-v1":
        raise CheckpointError("not a moplab tensor file")
    return header, sep + 1


def read_tensor_file(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        data = fh.read()
    header, start = _read_header(data)
    if len(data) < start + 4:
        raise CheckpointError("truncated file")
    blob, stored = data[start:-4], int.from_bytes(data[-4:], "little")
    if (zlib.crc32(blob) & 0xFFFFFFFF) != stored:
        raise CheckpointError("checksum mismatch")
    tensors = {}
    for entry in header["tensors"]:
        dt = np.dtype(DTYPES[entry["precision"]]).newbyteorder("<")
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        off = entry["offset"]
        end = off + count * dt.itemsize
        if end > len(blob):
            raise CheckpointError(f"tensor {entry['name']!r} overruns blob")
        arr = np.frombuffer(blob[off:end], dtype=dt).reshape(shape)
        tensors[entry["name"]] = arr.astype(dt.newbyteorder("="))
    return header["meta"], tensors


def save_checkpoint(weights: TransformerWeights, path) -> None:
    meta = {"kind": "checkpoint", "config": asdict(weights.config)}
    write_tensor_file(path, meta, weights.arrays, weights.config.precision)


def load_checkpoint(path) -> TransformerWeights:
    meta, tensors = read_tensor_file(path)
    if meta.get("kind") != "checkpoint":
        raise CheckpointError("not a model checkpoint")
    cfg = ModelConfig(**meta["config"])
    expected = {name: shape for name, shape, _ in _layout(cfg)}
    for name, shape in expected.items():
        if name not in tensors:
            raise CheckpointError(f"missing tensor {name!r}")
        if tensors[name].shape != shape:
            raise CheckpointError(
                f"shape mismatch for {name!r}: header {tensors[name].shape}, "
                f"config wants {shape}")
    return TransformerWeights(cfg, tensors)


def inspect_checkpoint(path) -> dict:
    """Header-only view: config plus the ordered tensor directory."""
    with open(path, "rb") as fh:
        data = fh.read(4 << 20)
    header, _ = _read_header(data)
    return {"meta": header["meta"], "tensors": header["tensors"]}

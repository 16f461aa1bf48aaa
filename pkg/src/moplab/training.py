"""Meta-training: minimize the average next-output prediction loss over M
source systems and their trajectories.

The dataset is a list of sampled systems plus per-system trajectory seeds;
trajectories are regenerated from seeds on demand (a fixed trajectory per
system by default, fresh noise per epoch optionally). The optimizer is Adam
with gradient-norm clipping; every draw is seeded, so a (config, seed) pair
reproduces the loss trace bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import engine, model
from .distributions import Distribution, get_distribution
from .model import ModelConfig, TransformerWeights
from .seeding import stream

__all__ = [
    "TrainConfig", "MetaDataset", "TrainingAborted", "TrainResult",
    "build_meta_dataset", "batch_loss", "sequence_losses", "train",
]

DIVERGENCE_LOSS = 1e6
LOSS_KINDS = ("l2_norm", "squared_l2")


class TrainingAborted(RuntimeError):
    def __init__(self, reason, step, last_checkpoint=None):
        super().__init__(f"training aborted at step {step}: {reason}")
        self.reason = reason
        self.step = step
        self.last_checkpoint = last_checkpoint


@dataclass(frozen=True)
class TrainConfig:
    preset: str = "linear-dense"
    m_systems: int = 2000
    train_len: int = 50              # outputs per trajectory
    steps: int = 5000
    batch_size: int = 64
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float = 1.0
    seed: int = 0
    loss_kind: str = "l2_norm"
    fresh_trajectories: bool = False
    checkpoint_every: int = 1000
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")
        for name in ("m_systems", "train_len", "batch_size", "checkpoint_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.steps < 0 or self.lr <= 0:
            raise ValueError("steps must be >= 0 and lr > 0")
        if self.train_len < 2:
            raise ValueError("train_len must be >= 2 (need a prediction target)")
        if self.train_len - 1 > self.model.context:
            raise ValueError("train_len - 1 exceeds the model context")


class MetaDataset:
    """Sampled source systems plus the seeds their trajectories grow from."""

    def __init__(self, dist: Distribution, m_systems, train_len, seed):
        self.dist = dist
        self.m_systems = m_systems
        self.train_len = train_len
        self.seed = seed
        self.systems = [dist.sample_system(seed, "train", i)
                        for i in range(m_systems)]
        self._cache: dict[int, tuple] = {}

    def trajectory(self, i, epoch=None):
        """(ys, us) for system i, regenerated from its seed; cached when the
        trajectory is the fixed per-system one."""
        if epoch is None and i in self._cache:
            return self._cache[i]
        traj = self.dist.make_trajectory(self.systems[i], self.train_len,
                                         self.seed, "train", i, epoch=epoch)
        pair = (traj.ys, traj.us)
        if epoch is None:
            self._cache[i] = pair
        return pair

    def manifest(self) -> dict:
        from .systems import systems_to_json
        return {
            "preset": self.dist.name,
            "m_systems": self.m_systems,
            "train_len": self.train_len,
            "seed": self.seed,
            "systems": systems_to_json(self.systems),
        }


def build_meta_dataset(preset, m_systems, train_len, seed) -> MetaDataset:
    return MetaDataset(get_distribution(preset), m_systems, train_len, seed)


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------

def sequence_losses(weights: TransformerWeights, ys, us=None,
                    loss_kind="l2_norm") -> np.ndarray:
    """Per-position prediction losses, shape (B, T-1): entry (i, t) is the
    loss of the prediction for y_{i,t+1} from the prompt y_{i,0:t}."""
    ys = np.asarray(ys)
    if ys.ndim == 2:
        ys = ys[None]
    tokens = model.make_tokens(ys[:, :-1], us)
    preds = model.forward(weights, tokens).data
    resid = preds - ys[:, 1:].astype(preds.dtype)
    if loss_kind == "squared_l2":
        return (resid * resid).sum(axis=-1)
    return np.sqrt((resid * resid).sum(axis=-1))


def batch_loss(weights: TransformerWeights, ys, us=None,
               graph: engine.Graph | None = None,
               loss_kind: str = "l2_norm") -> engine.Tensor:
    """Mean next-output prediction loss over a batch of trajectories.

    One forward pass per trajectory scores every position; the mean runs
    over all (trajectory, position) prediction terms in trajectory-major,
    time-minor order.
    """
    if loss_kind not in LOSS_KINDS:
        raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")
    ys = np.asarray(ys)
    if ys.ndim == 2:
        ys = ys[None]
    if ys.shape[1] < 2:
        raise ValueError("trajectories need at least 2 outputs")
    tokens = model.make_tokens(ys[:, :-1], us)
    preds = model.forward(weights, tokens, graph)
    targets = ys[:, 1:].astype(weights.config.dtype)
    resid = engine.sub(preds, engine.Tensor(targets))
    if loss_kind == "squared_l2":
        per_pos = engine.sum_lastdim(engine.mul(resid, resid))
    else:
        per_pos = engine.l2norm_lastdim(resid)
    return engine.mean_all(per_pos)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

class _Adam:
    def __init__(self, cfg: TrainConfig, arrays):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.t = 0

    def apply(self, arrays, grads):
        cfg = self.cfg
        self.t += 1
        b1c = 1.0 - cfg.beta1 ** self.t
        b2c = 1.0 - cfg.beta2 ** self.t
        for name, w in arrays.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * (g * g)
            w -= cfg.lr * (m / b1c) / (np.sqrt(v / b2c) + cfg.adam_eps)

    def state_tensors(self):
        out = {}
        for k, v in self.m.items():
            out["m." + k] = v
        for k, v in self.v.items():
            out["v." + k] = v
        return out

    def load_state(self, tensors, step):
        self.m = {k[2:]: v.copy() for k, v in tensors.items() if k.startswith("m.")}
        self.v = {k[2:]: v.copy() for k, v in tensors.items() if k.startswith("v.")}
        self.t = step


def _clip_gradients(grads: dict, clip_norm: float):
    total = 0.0
    for name in grads:
        g = grads[name]
        total += float((g.astype(np.float64) ** 2).sum())
    norm = float(np.sqrt(total))
    if clip_norm > 0 and norm > clip_norm:
        s = clip_norm / norm
        grads = {k: g * s for k, g in grads.items()}
    return norm, grads


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    final_checkpoint: str
    checkpoints: list
    loss_rows: list                  # dicts: step, loss, grad_norm, wallclock_s
    dataset_manifest: dict
    config: TrainConfig


def _save_state(weights, adam, step, path):
    model.save_checkpoint(weights, path)
    model.write_tensor_file(
        str(path) + ".opt", {"kind": "optimizer", "step": step},
        adam.state_tensors(), weights.config.precision)


def train(cfg: TrainConfig, out_dir, resume=None, log_every=50,
          quiet=True) -> TrainResult:
    """Run the meta-training loop, writing periodic checkpoints and a loss
    log under out_dir. `resume` continues from a checkpoint path written by
    an earlier (identically configured) run; the loss trace continues
    exactly where the interrupted run would have gone.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ds = build_meta_dataset(cfg.preset, cfg.m_systems, cfg.train_len, cfg.seed)

    if resume is not None:
        weights = model.load_checkpoint(resume)
        meta, tensors = model.read_tensor_file(str(resume) + ".opt")
        adam = _Adam(cfg, weights.arrays)
        adam.load_state(tensors, meta["step"])
        start_step = meta["step"]
    else:
        weights = model.init_weights(cfg.model, stream(cfg.seed, "init"))
        adam = _Adam(cfg, weights.arrays)
        start_step = 0

    checkpoints = []
    loss_rows = []
    last_ckpt = None
    t0 = time.time()

    def checkpoint(step, tag=None):
        name = tag or f"ckpt-{step:06d}.ckpt"
        path = out_dir / name
        _save_state(weights, adam, step, path)
        checkpoints.append(str(path))
        return str(path)

    if cfg.steps == 0 and resume is None:
        last_ckpt = checkpoint(0, "ckpt-final.ckpt")
        return TrainResult(last_ckpt, checkpoints, loss_rows, ds.manifest(), cfg)

    for step in range(start_step, cfg.steps):
        idx = stream(cfg.seed, "batch", step).integers(0, cfg.m_systems,
                                                       size=cfg.batch_size)
        epoch = step if cfg.fresh_trajectories else None
        ys_list, us_list = [], []
        for i in idx:
            ys, us = ds.trajectory(int(i), epoch=epoch)
            ys_list.append(ys)
            us_list.append(us)
        ys = np.stack(ys_list)
        us = np.stack(us_list) if us_list[0] is not None else None

        g = engine.Graph()
        with g:
            loss = batch_loss(weights, ys, us, g, cfg.loss_kind)
        loss_val = loss.item()
        if not np.isfinite(loss_val):
            checkpoint(step, "ckpt-abort.ckpt")
            raise TrainingAborted(
                f"non-finite loss (batch systems {sorted(set(int(i) for i in idx))[:8]}...)",
                step, last_ckpt)
        if loss_val > DIVERGENCE_LOSS:
            path = last_ckpt or checkpoint(step, "ckpt-abort.ckpt")
            raise TrainingAborted(f"loss {loss_val:.3e} exceeded {DIVERGENCE_LOSS:.0e}",
                                  step, path)

        grads_by_node = engine.backward(g, loss)
        grads = {name: grads_by_node[leaf] for name, leaf in g.params.items()}
        gnorm, grads = _clip_gradients(grads, cfg.clip_norm)
        adam.apply(weights.arrays, grads)

        loss_rows.append({"step": step, "loss": loss_val, "grad_norm": gnorm,
                          "wallclock_s": time.time() - t0})
        if not quiet and (step % log_every == 0 or step == cfg.steps - 1):
            print(f"step {step:6d}  loss {loss_val:.5f}  gnorm {gnorm:.3f}")
        if (step + 1) % cfg.checkpoint_every == 0 and step + 1 < cfg.steps:
            last_ckpt = checkpoint(step + 1)

    final = checkpoint(cfg.steps, "ckpt-final.ckpt")
    return TrainResult(final, checkpoints, loss_rows, ds.manifest(), cfg)

"""Evaluation harness: error-vs-time curves, predictor comparisons,
excess-risk estimates, scaling sweeps, robustness probes, and the
hard-system diagnostics.

Test systems and trajectories live in a "test" seed namespace disjoint
from training draws. Every reported mean carries a standard error over the
test population, and per-system results are reduced in system-index order
so runs are deterministic at any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import model, training
from .baselines import KalmanFilter, OnlineARPredictor, QuadrotorEKF, ZeroPredictor
from .distributions import Distribution, get_distribution
from .model import TransformerWeights
from .seeding import stream
from .systems import SwitchSpec, contraction_profile

__all__ = [
    "ErrorCurve", "RatioCurve", "RiskReport", "RobustnessReport",
    "ScalingReport", "PowerStudy", "ShiftReport", "MopPredictor",
    "make_predictor", "test_population", "error_curve", "compare_predictors",
    "window_stats", "empirical_risk", "empirical_excess_risk",
    "scaling_experiment", "robustness_probe", "matrix_power_study",
    "distribution_shift_sweep", "curves_to_csv_rows", "spearman", "kendall_tau",
]

RATIO_GUARD = 1e-12


# ---------------------------------------------------------------------------
# predictors
# ---------------------------------------------------------------------------

class MopPredictor:
    """Uniform step interface around a trained model: the prompt grows with
    each observation, the prediction is the last forward position."""

    def __init__(self, weights: TransformerWeights):
        self.weights = weights
        self._ys: list[np.ndarray] = []
        self._us: list[np.ndarray] = []

    def step(self, y, u=None) -> np.ndarray:
        self._ys.append(np.asarray(y, dtype=np.float64))
        if u is not None:
            self._us.append(np.asarray(u, dtype=np.float64))
        ys = np.stack(self._ys)
        us = np.stack(self._us) if self._us else None
        return model.predict_next(self.weights, ys, us)

    def predict_trajectory(self, ys, us=None) -> np.ndarray:
        """All next-output predictions in one causal pass (bit-identical to
        stepping, see the causality tests)."""
        return model.predict_sequence(self.weights, ys, us)


class OraclePredictor:
    """Plumbing-test device: peeks at the trajectory and returns the true
    next output (and the true first output), so its error curve is exactly
    zero end to end."""

    def __init__(self, traj):
        self._ys = traj.ys
        self._t = 0

    def predict_first(self) -> np.ndarray:
        return self._ys[0]

    def step(self, y, u=None) -> np.ndarray:
        self._t += 1
        return self._ys[self._t]


def make_predictor(kind: str, system, dist: Distribution,
                   weights: TransformerWeights | None = None, traj=None):
    if kind == "mop":
        if weights is None:
            raise ValueError("mop predictor needs model weights")
        return MopPredictor(weights)
    if kind == "kf":
        sw, sv = dist.filter_noise_stds()
        return KalmanFilter(system, sigma_w=sw, sigma_v=sv)
    if kind == "ekf":
        return QuadrotorEKF(system)
    if kind == "ar-ols":
        return OnlineARPredictor(system.m)
    if kind == "zero":
        return ZeroPredictor(system.m)
    if kind == "oracle":
        if traj is None:
            raise ValueError("oracle predictor needs the trajectory")
        return OraclePredictor(traj)
    raise ValueError(f"unknown predictor kind {kind!r}")


# ---------------------------------------------------------------------------
# test population
# ---------------------------------------------------------------------------

def test_population(dist: Distribution, n, horizon, seed, switch_at=None,
                    record_states=False):
    """Fresh systems and trajectories from the test namespace; optionally a
    dynamics switch partway through each trajectory."""
    systems, trajs, switches = [], [], []
    for i in range(n):
        system = dist.sample_system(seed, "test", i)
        switch = None
        if switch_at is not None:
            switch = SwitchSpec(switch_at, dist.sample_system(seed, "test-switch", i))
        traj = dist.make_trajectory(system, horizon, seed, "test", i, switch=switch)
        systems.append(system)
        trajs.append(traj)
        switches.append(switch)
    return systems, trajs, switches


@dataclass
class ErrorCurve:
    preset: str
    predictor: str
    n_systems: int
    horizon: int
    seed: int
    mean: np.ndarray                   # per-t mean of ||yhat_t - y_t||
    stderr: np.ndarray
    per_system: np.ndarray             # (n_ok, horizon)
    failed_systems: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "preset": self.preset, "predictor": self.predictor,
            "n_systems": self.n_systems, "horizon": self.horizon,
            "seed": self.seed, "mean": self.mean.tolist(),
            "stderr": self.stderr.tolist(),
            "failed_systems": self.failed_systems,
        }


def _run_predictor(predictor, traj) -> np.ndarray:
    """Predictions yhat_0..yhat_{T-1}; yhat_0 is the prior mean (zero, since
    x_0 = 0), the rest come from stepping the predictor."""
    ys, us = traj.ys, traj.us
    t_len, m = ys.shape
    preds = np.zeros((t_len, m))
    if hasattr(predictor, "predict_first"):
        preds[0] = predictor.predict_first()
    if hasattr(predictor, "predict_trajectory"):
        preds[1:] = predictor.predict_trajectory(
            ys[:-1], us if us is None else us[:-1])
        return preds
    for t in range(t_len - 1):
        u = us[t] if us is not None else None
        preds[t + 1] = predictor.step(ys[t], u)
    return preds


def error_curve(predictor_kind: str, preset, n, horizon, seed,
                weights: TransformerWeights | None = None, switch_at=None,
                threads: int = 1, population=None) -> ErrorCurve:
    """Per-timestep prediction-error statistics over n fresh test systems.

    `population` may carry a precomputed (systems, trajs, switches) triple
    so several predictors score identical data.
    """
    dist = preset if isinstance(preset, Distribution) else get_distribution(preset)
    if population is None:
        population = test_population(dist, n, horizon, seed, switch_at)
    systems, trajs, _ = population

    if predictor_kind == "mop":
        errs = _mop_errors(weights, trajs)
    else:
        def one(i):
            pred = make_predictor(predictor_kind, systems[i], dist, weights,
                                  traj=trajs[i])
            return np.linalg.norm(_run_predictor(pred, trajs[i]) - trajs[i].ys, axis=1)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                rows = list(pool.map(one, range(n)))
        else:
            rows = [one(i) for i in range(n)]
        errs = np.stack(rows)

    ok = np.isfinite(errs).all(axis=1)
    failed = [i for i in range(n) if not ok[i]]
    good = errs[ok]
    if good.shape[0] == 0:
        raise RuntimeError("every test system produced non-finite predictions")
    mean = good.mean(axis=0)
    stderr = good.std(axis=0, ddof=1) / np.sqrt(good.shape[0]) if good.shape[0] > 1 \
        else np.zeros(horizon)
    return ErrorCurve(preset=dist.name, predictor=predictor_kind,
                      n_systems=int(good.shape[0]), horizon=horizon, seed=seed,
                      mean=mean, stderr=stderr, per_system=good,
                      failed_systems=failed)


def _mop_errors(weights, trajs) -> np.ndarray:
    """Batched causal forward over the whole population (same lengths)."""
    ys = np.stack([t.ys for t in trajs])
    us = np.stack([t.us for t in trajs]) if trajs[0].us is not None else None
    preds = model.predict_sequence(
        weights, ys[:, :-1], us if us is None else us[:, :-1])
    errs = np.zeros(ys.shape[:2])
    errs[:, 0] = np.linalg.norm(ys[:, 0], axis=-1)       # prior-mean prediction
    errs[:, 1:] = np.linalg.norm(preds - ys[:, 1:], axis=-1)
    return errs


def window_stats(curve: ErrorCurve, lo, hi):
    """Mean/stderr of the per-system average error over time window
    [lo, hi] (inclusive, clipped to the horizon)."""
    lo = max(0, lo)
    hi = min(curve.horizon - 1, hi)
    if hi < lo:
        raise ValueError("empty window")
    per_system = curve.per_system[:, lo:hi + 1].mean(axis=1)
    mean = float(per_system.mean())
    stderr = float(per_system.std(ddof=1) / np.sqrt(len(per_system))) \
        if len(per_system) > 1 else 0.0
    return mean, stderr, per_system


@dataclass
class RatioCurve:
    preset: str
    numerator: str
    denominator: str
    ratio: np.ndarray                  # per-t mean_num / mean_den
    undefined: np.ndarray              # bool mask where the guard tripped
    early: dict
    late: dict

    def to_json(self) -> dict:
        return {
            "preset": self.preset, "numerator": self.numerator,
            "denominator": self.denominator,
            "ratio": [None if u else float(r)
                      for r, u in zip(self.ratio, self.undefined)],
            "early": self.early, "late": self.late,
        }


def compare_predictors(curve_a: ErrorCurve, curve_b: ErrorCurve) -> RatioCurve:
    """Per-timestep error ratio A/B plus early/late window summaries."""
    for f in ("preset", "horizon", "seed"):
        if getattr(curve_a, f) != getattr(curve_b, f):
            raise ValueError(f"curves disagree on {f}")
    undefined = curve_b.mean < RATIO_GUARD
    ratio = np.where(undefined, np.nan, curve_a.mean / np.maximum(curve_b.mean, RATIO_GUARD))
    t = curve_a.horizon

    def window(lo, hi):
        ma, sa, _ = window_stats(curve_a, lo, hi)
        mb, sb, _ = window_stats(curve_b, lo, hi)
        return {"lo": lo, "hi": hi, "mean_num": ma, "stderr_num": sa,
                "mean_den": mb, "stderr_den": sb,
                "ratio": ma / mb if mb > RATIO_GUARD else None}

    return RatioCurve(preset=curve_a.preset, numerator=curve_a.predictor,
                      denominator=curve_b.predictor, ratio=ratio,
                      undefined=undefined,
                      early=window(2, 10), late=window(t - 10, t))


# ---------------------------------------------------------------------------
# risk
# ---------------------------------------------------------------------------

@dataclass
class RiskReport:
    preset: str
    baseline: str
    n_systems: int
    horizon: int
    seed: int
    risk_model: float                  # empirical risk of the transformer
    risk_baseline: float               # same formula on the filter
    delta: float                       # excess-risk proxy
    stderr: float                      # stderr of the paired per-system delta
    per_system_delta: np.ndarray

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in
             ("preset", "baseline", "n_systems", "horizon", "seed",
              "risk_model", "risk_baseline", "delta", "stderr")}
        return d


def empirical_risk(weights: TransformerWeights, trajs, loss_kind="l2_norm") -> np.ndarray:
    """Per-system empirical risk of the model: mean over positions of the
    prediction loss (the training objective evaluated out of sample)."""
    ys = np.stack([t.ys for t in trajs])
    us = np.stack([t.us for t in trajs]) if trajs[0].us is not None else None
    losses = training.sequence_losses(weights, ys, us, loss_kind)
    return losses.mean(axis=1)


def _baseline_risk(kind, systems, trajs, dist, loss_kind="l2_norm") -> np.ndarray:
    out = np.zeros(len(systems))
    for i, (system, traj) in enumerate(zip(systems, trajs)):
        pred = make_predictor(kind, system, dist)
        preds = _run_predictor(pred, traj)
        err = np.linalg.norm(preds[1:] - traj.ys[1:], axis=1)
        out[i] = float((err ** 2).mean()) if loss_kind == "squared_l2" \
            else float(err.mean())
    return out


def empirical_excess_risk(weights: TransformerWeights, preset, n, horizon,
                          seed, baseline=None, population=None) -> RiskReport:
    """Excess-risk proxy: empirical risk of the model minus that of the
    model-aware filter on the same fresh systems. For linear-Gaussian
    presets the filter is Bayes-optimal, making the proxy an upper bound on
    the true excess risk up to estimation noise.
    """
    dist = preset if isinstance(preset, Distribution) else get_distribution(preset)
    if baseline is None:
        baseline = "ekf" if dist.kind == "quadrotor" else "kf"
    if baseline not in ("kf", "ekf"):
        raise ValueError("excess risk needs a model-aware baseline (kf or ekf)")
    if population is None:
        population = test_population(dist, n, horizon, seed)
    systems, trajs, _ = population
    model_risk = empirical_risk(weights, trajs)
    base_risk = _baseline_risk(baseline, systems, trajs, dist)
    delta = model_risk - base_risk
    stderr = float(delta.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return RiskReport(preset=dist.name, baseline=baseline, n_systems=n,
                      horizon=horizon, seed=seed,
                      risk_model=float(model_risk.mean()),
                      risk_baseline=float(base_risk.mean()),
                      delta=float(delta.mean()), stderr=stderr,
                      per_system_delta=delta)


# ---------------------------------------------------------------------------
# scaling in (M, T)
# ---------------------------------------------------------------------------

@dataclass
class ScalingReport:
    preset: str
    cells: list                        # dicts: m_systems, train_len, delta, stderr, flagged
    spearman_delta_vs_mt: float
    loglog_slope: float | None

    def to_json(self) -> dict:
        return {"preset": self.preset, "cells": self.cells,
                "spearman_delta_vs_mt": self.spearman_delta_vs_mt,
                "loglog_slope": self.loglog_slope}


def spearman(x, y) -> float:
    """Spearman rank correlation (average ranks on ties)."""
    def ranks(v):
        v = np.asarray(v, dtype=np.float64)
        order = np.argsort(v, kind="stable")
        r = np.empty(len(v))
        r[order] = np.arange(1, len(v) + 1)
        for val in np.unique(v):
            mask = v == val
            if mask.sum() > 1:
                r[mask] = r[mask].mean()
        return r

    rx, ry = ranks(x), ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx ** 2).sum() * (ry ** 2).sum())
    return float((rx * ry).sum() / denom) if denom > 0 else 0.0


def kendall_tau(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    conc = disc = 0
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            s = np.sign(x[i] - x[j]) * np.sign(y[i] - y[j])
            conc += s > 0
            disc += s < 0
    total = len(x) * (len(x) - 1) / 2
    return float((conc - disc) / total) if total else 0.0


def fit_loglog_slope(mt, delta) -> float | None:
    mt = np.asarray(mt, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    keep = delta > 0
    if keep.sum() < 2:
        return None
    coef = np.polyfit(np.log(mt[keep]), np.log(delta[keep]), 1)
    return float(coef[0])


def scaling_experiment(grid, base_cfg: training.TrainConfig, n, horizon, seed,
                       out_root, reuse=True) -> ScalingReport:
    """Train one model per (M, T^tr) cell at a fixed step budget and report
    how the excess-risk proxy moves with the training volume M*T."""
    import dataclasses
    from pathlib import Path

    out_root = Path(out_root)
    cells = []
    for m_systems, train_len in grid:
        cfg = dataclasses.replace(base_cfg, m_systems=int(m_systems),
                                  train_len=int(train_len))
        cell_dir = out_root / f"cell-M{m_systems}-T{train_len}"
        final = cell_dir / "ckpt-final.ckpt"
        flagged = None
        if not (reuse and final.exists()):
            try:
                training.train(cfg, cell_dir)
            except training.TrainingAborted as exc:
                flagged = str(exc)
        if flagged is None:
            weights = model.load_checkpoint(final)
            report = empirical_excess_risk(weights, cfg.preset, n, horizon, seed)
            cells.append({"m_systems": int(m_systems), "train_len": int(train_len),
                          "mt": int(m_systems) * int(train_len),
                          "delta": report.delta, "stderr": report.stderr,
                          "flagged": None})
        else:
            cells.append({"m_systems": int(m_systems), "train_len": int(train_len),
                          "mt": int(m_systems) * int(train_len),
                          "delta": None, "stderr": None, "flagged": flagged})

    good = [c for c in cells if c["flagged"] is None]
    rho = spearman([c["mt"] for c in good], [c["delta"] for c in good]) \
        if len(good) >= 2 else 0.0
    slope = fit_loglog_slope([c["mt"] for c in good], [c["delta"] for c in good])
    return ScalingReport(preset=base_cfg.preset, cells=cells,
                         spearman_delta_vs_mt=rho, loglog_slope=slope)


# ---------------------------------------------------------------------------
# robustness probe (single-time noise replacement)
# ---------------------------------------------------------------------------

@dataclass
class RobustnessReport:
    preset: str
    n_systems: int
    perturb_scale: float
    mc_draws: int
    taus: list
    t_eval: int
    khat_max: float
    khat_median: float
    abs_dloss_by_gap: list             # dicts: gap, mean_abs_dloss
    kendall_tau_abs_dloss_vs_gap: float
    cells: list                        # dicts: t, tau, khat, abs_dloss (means)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in
                ("preset", "n_systems", "perturb_scale", "mc_draws", "taus",
                 "t_eval", "khat_max", "khat_median", "abs_dloss_by_gap",
                 "kendall_tau_abs_dloss_vs_gap", "cells")}


def robustness_probe(weights: TransformerWeights, preset, n_systems=8,
                     t_eval=45, taus=(5, 15, 25, 35, 44), perturb_scale=1.0,
                     mc_draws=256, seed=0) -> RobustnessReport:
    """Estimate the prompt-perturbation constant: replace the noise pair at
    one time tau, roll the paired trajectory, and measure how much the
    expected next-step loss moves, per unit of accumulated output
    difference. The expectation over the next noise pair uses mc_draws
    Monte-Carlo samples shared by both branches.
    """
    dist = preset if isinstance(preset, Distribution) else get_distribution(preset)
    if dist.kind != "linear" or dist.noise.kind != "iid":
        raise ValueError("the robustness probe targets the i.i.d. linear preset")
    taus = [int(tau) for tau in taus]
    if any(tau >= t_eval for tau in taus):
        raise ValueError("every tau must precede t_eval")
    horizon = t_eval + 1
    sw, sv = np.sqrt(dist.sigma_w2), np.sqrt(dist.sigma_v2)

    khat = np.zeros((len(taus), n_systems))
    adl = np.zeros((len(taus), n_systems))
    for i in range(n_systems):
        system = dist.sample_system(seed, "probe", i)
        rng = stream(seed, dist.name, "probe-noise", i)
        w = sw * rng.standard_normal((horizon, system.n))
        v = sv * rng.standard_normal((horizon, system.m))
        a, c = system.a, system.c
        xs = np.zeros((horizon, system.n))
        for t in range(1, horizon):
            xs[t] = a @ xs[t - 1] + w[t]
        ys = xs @ c.T + v

        mc = stream(seed, dist.name, "probe-mc", i)
        wk = sw * mc.standard_normal((mc_draws, system.n))
        vk = sv * mc.standard_normal((mc_draws, system.m))

        for j, tau in enumerate(taus):
            prng = stream(seed, dist.name, "probe-perturb", i, tau)
            dw = perturb_scale * prng.standard_normal(system.n)
            dv = perturb_scale * prng.standard_normal(system.m)
            xs2 = xs.copy()
            for t in range(tau, horizon):
                if t == tau:
                    xs2[t] = xs[t] + dw
                else:
                    xs2[t] = a @ xs2[t - 1] + w[t]
            ys2 = xs2 @ c.T + v
            ys2[tau] += dv

            p1 = model.predict_next(weights, ys[: t_eval + 1])
            p2 = model.predict_next(weights, ys2[: t_eval + 1])
            # target draws from the unperturbed state, shared across branches
            y_next = (a @ xs[t_eval] + wk) @ c.T + vk
            dloss = np.linalg.norm(y_next - p1, axis=1) \
                - np.linalg.norm(y_next - p2, axis=1)
            exp_dloss = abs(float(dloss.mean()))
            denom = float(np.linalg.norm(ys2[tau: t_eval + 1] - ys[tau: t_eval + 1],
                                         axis=1).sum())
            adl[j, i] = exp_dloss
            khat[j, i] = 0.0 if denom == 0.0 else (t_eval - tau) * exp_dloss / denom

    gaps = [t_eval - tau for tau in taus]
    mean_adl = adl.mean(axis=1)
    cells = [{"t": t_eval, "tau": tau, "khat": float(khat[j].mean()),
              "abs_dloss": float(mean_adl[j])} for j, tau in enumerate(taus)]
    by_gap = sorted(
        ({"gap": g, "mean_abs_dloss": float(m)} for g, m in zip(gaps, mean_adl)),
        key=lambda r: r["gap"])
    tau_stat = kendall_tau([r["gap"] for r in by_gap],
                           [r["mean_abs_dloss"] for r in by_gap])
    return RobustnessReport(
        preset=dist.name, n_systems=n_systems, perturb_scale=perturb_scale,
        mc_draws=mc_draws, taus=list(taus), t_eval=t_eval,
        khat_max=float(khat.max()), khat_median=float(np.median(khat)),
        abs_dloss_by_gap=by_gap, kendall_tau_abs_dloss_vs_gap=tau_stat,
        cells=cells)


# ---------------------------------------------------------------------------
# matrix-power study (mixing diagnostics)
# ---------------------------------------------------------------------------

@dataclass
class PowerStudy:
    mode: str
    count: int
    t_max: int
    mean_norms: np.ndarray             # per-t mean of ||A^t||
    overshoots: np.ndarray             # per-system max_t ||A^t|| / ||A^0||
    mean_overshoot: float
    stderr_overshoot: float

    def to_json(self) -> dict:
        return {"mode": self.mode, "count": self.count, "t_max": self.t_max,
                "mean_norms": self.mean_norms.tolist(),
                "mean_overshoot": self.mean_overshoot,
                "stderr_overshoot": self.stderr_overshoot}


def matrix_power_study(mode, count, t_max, seed) -> PowerStudy:
    name = {"dense": "linear-dense", "upper_triangular": "linear-triangular"}[mode]
    dist = get_distribution(name)
    norms = np.zeros((count, t_max + 1))
    for i in range(count):
        system = dist.sample_system(seed, "powers", i)
        norms[i] = contraction_profile(system, t_max).norms
    overshoots = norms.max(axis=1) / norms[:, 0]
    return PowerStudy(mode=mode, count=count, t_max=t_max,
                      mean_norms=norms.mean(axis=0), overshoots=overshoots,
                      mean_overshoot=float(overshoots.mean()),
                      stderr_overshoot=float(overshoots.std(ddof=1) / np.sqrt(count)))


# ---------------------------------------------------------------------------
# distribution shift
# ---------------------------------------------------------------------------

@dataclass
class ShiftReport:
    preset: str
    train_sigma2: float
    test_sigma2: list
    late_ratios: list                  # MOP/KF late-window ratio per sigma2
    curves: dict                       # sigma2 -> {predictor: ErrorCurve}

    def to_json(self) -> dict:
        return {"preset": self.preset, "train_sigma2": self.train_sigma2,
                "test_sigma2": self.test_sigma2, "late_ratios": self.late_ratios}


def distribution_shift_sweep(weights: TransformerWeights, preset, test_sigma2,
                             n, horizon, seed, train_sigma2=0.01) -> ShiftReport:
    """Score the model (trained at train_sigma2) on populations whose noise
    covariance differs; systems and standardized noise draws are shared
    across levels, so only the noise scale moves."""
    base = preset if isinstance(preset, Distribution) else get_distribution(preset)
    ratios, curves = [], {}
    for s2 in test_sigma2:
        dist = base.with_noise_var(s2)
        population = test_population(dist, n, horizon, seed)
        mop = error_curve("mop", dist, n, horizon, seed, weights=weights,
                          population=population)
        kf = error_curve("kf", dist, n, horizon, seed, population=population)
        ratio = compare_predictors(mop, kf)
        ratios.append(ratio.late["ratio"])
        curves[s2] = {"mop": mop, "kf": kf}
    return ShiftReport(preset=base.name, train_sigma2=train_sigma2,
                       test_sigma2=list(test_sigma2), late_ratios=ratios,
                       curves=curves)


# ---------------------------------------------------------------------------
# tabular output
# ---------------------------------------------------------------------------

def curves_to_csv_rows(experiment, curves) -> list[dict]:
    """One row per (predictor, t): the plotting/reporting schema."""
    rows = []
    for curve in curves:
        for t in range(curve.horizon):
            rows.append({
                "experiment": experiment,
                "preset": curve.preset,
                "predictor": curve.predictor,
                "t": t,
                "mean_err": float(curve.mean[t]),
                "stderr": float(curve.stderr[t]),
                "n_systems": curve.n_systems,
                "seed": curve.seed,
            })
    return rows

"""Training loop: SGD with momentum, batch composition, the trade-off ramp,
early stopping, and the leave-one-subject-out harness.

One step draws a batch of source bags and target bags, runs a single shared
feature pass over all of their frames, and backs one gradient through

    source regression loss + target weak loss + domain loss,

with the gradient reversal node inside the domain branch supplying the
adversarial minus sign. Mode flags reduce this to the ablation scenarios:
source-only and target-only drop the other domain's terms, "joint-no-DA"
(alias "none") keeps both label losses but no domain branch, and "transfer"
trains source-only for the first half of the epoch budget and fine-tunes on
target weak labels for the second.

Source-only modes additionally fit the ordinal head on quantized source
frame labels, so they remain usable frame-level predictors and serve as the
no-adaptation baseline.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import as_tensor, zero_gradients
from .bags import POOLINGS, make_bags, pool_rows, pooling_indices
from .labels import ENCODINGS, encode_labels, level_from_continuous
from .losses import (LossReport, domain_loss, lambda_schedule, source_loss,
                     target_weak_loss)
from .metrics import MetricsReport, evaluate
from .network import Network, NetworkConfig

DA_MODES = ("none", "source-only", "target-only", "joint-no-DA",
            "adversarial", "transfer")


class TrainingDiverged(RuntimeError):
    """A loss went non-finite. ``diagnostics`` holds the state dump."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 1e-5
    epochs: int = 60
    source_batch: int = 4
    target_batch: int = 2
    anneal_factor: float = 0.5
    anneal_every: int = 5
    anneal_after: int = 20
    gamma: float = 10.0
    patience: int = 10
    window: int = 64
    stride: int = 8
    sigma: float = 0.3
    levels: int = 6
    encoding: str = "gaussian"
    pooling: str = "adaptive"
    mode: str = "adversarial"
    steps_per_epoch: int = 0  # 0 derives steps from the larger bag pool
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        for name in ("epochs", "source_batch", "target_batch", "anneal_every",
                     "patience", "window", "stride"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.anneal_after < 0 or self.steps_per_epoch < 0:
            raise ValueError("anneal_after and steps_per_epoch must be >= 0")
        if not 0.0 < self.anneal_factor <= 1.0:
            raise ValueError(f"anneal_factor must be in (0, 1], got {self.anneal_factor}")
        if self.gamma <= 0 or self.sigma <= 0:
            raise ValueError("gamma and sigma must be positive")
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")
        if self.encoding not in ENCODINGS:
            raise ValueError(f"encoding must be one of {ENCODINGS}, got {self.encoding!r}")
        if self.pooling not in POOLINGS:
            raise ValueError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")
        if self.mode not in DA_MODES:
            raise ValueError(f"mode must be one of {DA_MODES}, got {self.mode!r}")


@dataclass
class TrainState:
    """Mutable optimizer state. Velocity shapes mirror parameter shapes."""

    config: TrainConfig
    network: Network
    velocity: dict
    epoch: int = 0
    best_score: float = -math.inf
    best_epoch: int = -1
    since_improved: int = 0
    history: list = field(default_factory=list)
    best_params: dict | None = None


def new_state(config: TrainConfig, network: Network) -> TrainState:
    velocity = {name: np.zeros_like(p.data) for name, p in network.params.items()}
    return TrainState(config=config, network=network, velocity=velocity)


def effective_lr(config: TrainConfig, epoch: int) -> float:
    """Step-decayed learning rate: multiply by anneal_factor every
    anneal_every epochs once epoch reaches anneal_after."""
    if epoch < config.anneal_after:
        return config.lr
    n = (epoch - config.anneal_after) // config.anneal_every + 1
    return config.lr * config.anneal_factor ** n


def phase_mode(config: TrainConfig, epoch: int) -> str:
    """The effective mode of one epoch ("transfer" resolves to its phase)."""
    if config.mode == "transfer":
        return "source-only" if epoch < config.epochs // 2 else "target-only"
    if config.mode == "none":
        return "joint-no-DA"
    return config.mode


def weighted_sampler(bags, seed):
    """Infinite stream of bags drawn with probability inversely proportional
    to the size of each bag's weak-label class, equalizing class draw rates.
    """
    if not bags:
        raise ValueError("cannot sample from an empty bag list")
    labels = np.array([b.weak_label for b in bags])
    counts = {int(l): int((labels == l).sum()) for l in np.unique(labels)}
    weights = np.array([1.0 / counts[int(l)] for l in labels])
    probs = weights / weights.sum()
    rng = np.random.default_rng(seed)
    n = len(bags)
    while True:
        yield bags[int(rng.choice(n, p=probs))]


def sgd_step(state: TrainState, lr: float) -> None:
    """One momentum update over every parameter, with additive weight decay.

    lr = 0 is an exact no-op: neither parameters nor velocity change.
    """
    if lr == 0:
        return
    cfg = state.config
    for name, p in state.network.params.items():
        g = p.grad + cfg.weight_decay * p.data
        v = state.velocity[name]
        v *= cfg.momentum
        v += g
        p.data = p.data - lr * v


def _spans(bags):
    spans, start = [], 0
    for b in bags:
        spans.append((start, start + len(b)))
        start += len(b)
    return spans


def _diverged(state: TrainState, report: LossReport) -> TrainingDiverged:
    diag = {
        "epoch": state.epoch,
        "losses": {"source": report.source, "target": report.target,
                   "domain": report.domain, "trade_off": report.trade_off},
        "param_norms": {k: float(np.linalg.norm(p.data))
                        for k, p in state.network.params.items()},
        "velocity_norms": {k: float(np.linalg.norm(v))
                           for k, v in state.velocity.items()},
    }
    return TrainingDiverged("non-finite loss; training aborted", diag)


def train_step(state: TrainState, source_batch, target_batch, trade_off: float,
               lr: float | None = None, mode: str | None = None):
    """One SGD step on the mode's composite objective.

    Returns ``(state, LossReport)``; the state is updated in place. The
    reported total is the algebraic ``source + target - trade_off * domain``
    while the backward pass runs on the plus-form graph (see losses module).
    """
    cfg = state.config
    net = state.network
    mode = phase_mode(cfg, state.epoch) if mode is None else mode
    use_source = mode != "target-only"
    use_target = mode not in ("source-only",)
    use_domain = mode == "adversarial"
    if use_source and not source_batch:
        raise ValueError(f"mode {mode!r} needs a non-empty source batch")
    if use_target and not target_batch:
        raise ValueError(f"mode {mode!r} needs a non-empty target batch")

    bags = (list(source_batch) if use_source else []) \
        + (list(target_batch) if use_target else [])
    n_source = len(source_batch) if use_source else 0
    spans = _spans(bags)
    frames = np.concatenate([b.frames for b in bags], axis=0)

    zero_gradients(net.params.values())
    feats = net.features(frames)

    src_term = tgt_term = dom_term = 0.0
    graph = as_tensor(0.0)

    if use_source:
        preds_all = net.regression_head(feats)
        preds, labels = [], []
        for b, (lo, hi) in zip(source_batch, spans[:n_source]):
            if b.frame_labels is None:
                raise ValueError("source batch contains a bag without frame labels")
            preds.append(preds_all.select_rows(np.arange(lo, hi)))
            labels.append(b.frame_labels)
        src_term = source_loss(preds, labels)
        graph = graph + src_term
        if mode == "source-only":
            # Auxiliary per-frame ordinal loss on quantized source labels so
            # the level head is trained without any target data.
            probs_src = net.ordinal_head(feats)
            frame_levels = np.concatenate(
                [[level_from_continuous(v, cfg.levels) for v in b.frame_labels]
                 for b in source_batch])
            codes = encode_labels(frame_levels, cfg.encoding, cfg.sigma, cfg.levels)
            aux = target_weak_loss([probs_src], [codes], n_sequences=len(frame_levels))
            src_term = src_term + aux
            graph = graph + aux

    if use_target:
        probs_all = net.ordinal_head(feats)
        pooled, codes = [], []
        for b, (lo, hi) in zip(target_batch, spans[n_source:]):
            rel = pooling_indices(probs_all.data[lo:hi], cfg.pooling)
            pooled.append(probs_all.select_rows(np.arange(lo, hi)[rel]).mean(axis=0))
            codes.append(encode_labels([b.weak_label], cfg.encoding,
                                       cfg.sigma, cfg.levels)[0])
        tgt_term = target_weak_loss(pooled, codes)
        graph = graph + tgt_term

    if use_domain:
        dom_all = net.domain_head(feats, trade_off)
        dom_preds = [dom_all.select_rows(np.arange(lo, hi)) for lo, hi in spans]
        dom_term = domain_loss(dom_preds, [b.domain for b in bags])
        graph = graph + dom_term

    report = LossReport.from_terms(src_term, tgt_term, dom_term,
                                   trade_off if use_domain else 0.0)
    if not all(map(math.isfinite, (report.source, report.target, report.domain))):
        raise _diverged(state, report)

    graph.backward()
    sgd_step(state, cfg.lr if lr is None else lr)
    return state, report


# -- prediction and scoring -------------------------------------------------

def predict_levels(network: Network, frames) -> np.ndarray:
    """Per-frame ordinal level: argmax of the level head's softmax rows."""
    return network.forward_target(np.asarray(frames, dtype=np.float64)).data.argmax(axis=1)


def predict_intensity(network: Network, frames) -> np.ndarray:
    """Per-frame continuous intensity from the regression head."""
    return network.forward_source(np.asarray(frames, dtype=np.float64)).data.reshape(-1)


def evaluate_frames(network: Network, sequences, aggregate: str = "mean") -> MetricsReport:
    """Frame-level metrics of predicted levels against ground-truth levels."""
    preds = [predict_levels(network, s.frames) for s in sequences]
    refs = [np.asarray(s.frame_labels, dtype=np.float64) for s in sequences]
    return evaluate(preds, refs, level="frame", aggregate=aggregate)


def evaluate_bags(network: Network, sequences, window: int, stride: int,
                  pooling: str, levels: int, aggregate: str = "mean") -> MetricsReport:
    """Sequence-level metrics: pooled bag level vs weak label, per sequence."""
    preds, refs = [], []
    for seq in sequences:
        bags = make_bags(seq, window, stride, levels)
        if not bags:
            continue
        probs = network.forward_target(seq.frames).data
        levels_pred, levels_ref = [], []
        for b in bags:
            start = b.parent[2]
            pooled = pool_rows(probs[start:start + window], pooling)
            levels_pred.append(int(np.argmax(pooled)))
            levels_ref.append(b.weak_label)
        preds.append(np.array(levels_pred, dtype=np.float64))
        refs.append(np.array(levels_ref, dtype=np.float64))
    if not preds:
        raise ValueError("no sequence is long enough to form a bag")
    return evaluate(preds, refs, level="sequence", aggregate=aggregate)


def validation_score(network: Network, sequences) -> float:
    """Mean frame-level correlation on held-out sequences (NaN if undefined)."""
    return evaluate_frames(network, sequences).pcc


def fit(config: TrainConfig, source_sequences, target_sequences,
        validation_sequences, network: Network | None = None) -> TrainState:
    """Run the full training loop and return the state at the best epoch.

    Model selection: frame-level correlation on ``validation_sequences``
    (their ground-truth levels are read here only, never by training steps).
    Stops once the score has not improved for ``patience`` epochs. The
    returned state's network holds the best-scoring parameters; ``history``
    has one record per completed epoch.
    """
    if not validation_sequences:
        raise ValueError("validation split must be non-empty")
    needs_source = config.mode != "target-only"
    needs_target = config.mode != "source-only"
    if needs_source and not source_sequences:
        raise ValueError(f"mode {config.mode!r} needs source sequences")
    if needs_target and not target_sequences:
        raise ValueError(f"mode {config.mode!r} needs target sequences")

    some = (list(source_sequences) or list(target_sequences))[0]
    input_dim = some.frames.shape[1]
    if network is None:
        network = Network(NetworkConfig(input_dim=input_dim, levels=config.levels,
                                        seed=config.seed))
    state = new_state(config, network)

    source_bags = [b for s in source_sequences
                   for b in make_bags(s, config.window, config.stride, config.levels)]
    target_bags = [b for s in target_sequences
                   for b in make_bags(s, config.window, config.stride, config.levels)]
    if needs_source and not source_bags:
        raise ValueError("window is longer than every source sequence; no bags")
    if needs_target and not target_bags:
        raise ValueError("window is longer than every target sequence; no bags")

    src_stream = weighted_sampler(source_bags, [config.seed, 1]) if source_bags else None
    tgt_stream = weighted_sampler(target_bags, [config.seed, 2]) if target_bags else None

    steps = config.steps_per_epoch
    if steps == 0:
        per_source = math.ceil(len(source_bags) / config.source_batch) if needs_source else 0
        per_target = math.ceil(len(target_bags) / config.target_batch) if needs_target else 0
        steps = max(1, per_source, per_target)

    ramp = max(1, config.epochs - 1)
    for epoch in range(config.epochs):
        state.epoch = epoch
        mode = phase_mode(config, epoch)
        lam = lambda_schedule(epoch / ramp, config.gamma) if mode == "adversarial" else 0.0
        lr = effective_lr(config, epoch)
        sums = {"source": 0.0, "target": 0.0, "domain": 0.0, "total": 0.0}
        for _ in range(steps):
            sb = [next(src_stream) for _ in range(config.source_batch)] \
                if mode != "target-only" else []
            tb = [next(tgt_stream) for _ in range(config.target_batch)] \
                if mode != "source-only" else []
            _, report = train_step(state, sb, tb, lam, lr=lr, mode=mode)
            sums["source"] += report.source
            sums["target"] += report.target
            sums["domain"] += report.domain
            sums["total"] += report.total
        score = validation_score(network, validation_sequences)
        state.history.append({
            "epoch": epoch, "mode": mode, "lr": lr, "trade_off": lam,
            "source": sums["source"] / steps, "target": sums["target"] / steps,
            "domain": sums["domain"] / steps, "total": sums["total"] / steps,
            "val_pcc": score,
        })
        comparable = score if math.isfinite(score) else -2.0
        if comparable > state.best_score:
            state.best_score = comparable
            state.best_epoch = epoch
            state.best_params = network.state_arrays()
            state.since_improved = 0
        else:
            state.since_improved += 1
            if state.since_improved >= config.patience:
                break
    if state.best_params is not None:
        network.load_state(state.best_params)
    return state


# -- leave-one-subject-out harness ------------------------------------------

@dataclass(frozen=True)
class FoldResult:
    test_subject: int
    validation_subject: int
    report: MetricsReport
    state: TrainState


def loso_evaluate(config: TrainConfig, source_sequences, target_sequences):
    """Train one model per held-out target subject and score it on that subject.

    The validation subject of each fold is the next subject in sorted order
    (cyclically); it also stays in the fold's training set, since small
    cohorts cannot spare a second held-out subject. Returns
    ``(folds, aggregate)`` where the aggregate averages fold metrics,
    skipping undefined values.
    """
    subjects = sorted({s.subject_id for s in target_sequences})
    if len(subjects) < 2:
        raise ValueError(f"LOSO needs at least 2 target subjects, got {len(subjects)}")
    folds = []
    for i, test_subject in enumerate(subjects):
        val_subject = subjects[(i + 1) % len(subjects)]
        train_seqs = [s for s in target_sequences if s.subject_id != test_subject]
        val_seqs = [s for s in target_sequences if s.subject_id == val_subject]
        assert all(s.subject_id != test_subject for s in train_seqs)
        fold_config = dataclasses.replace(config, seed=config.seed + 101 * (i + 1))
        state = fit(fold_config, source_sequences, train_seqs, val_seqs)
        test_seqs = [s for s in target_sequences if s.subject_id == test_subject]
        report = evaluate_frames(state.network, test_seqs)
        folds.append(FoldResult(test_subject, val_subject, report, state))

    def _mean(values):
        values = [v for v in values if math.isfinite(v)]
        return float(np.mean(values)) if values else math.nan

    aggregate = MetricsReport(
        pcc=_mean([f.report.pcc for f in folds]),
        icc=_mean([f.report.icc for f in folds]),
        mae=_mean([f.report.mae for f in folds]),
        level="frame", per_sequence=())
    return folds, aggregate

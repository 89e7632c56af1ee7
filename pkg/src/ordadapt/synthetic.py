"""Two-domain synthetic sequence generator with known frame-level truth.

Each sequence follows a latent intensity z(t) in [0, 1]: a flat baseline
interrupted by sparse piecewise-linear episodes (onset ramp, plateau, offset
ramp), so elevated frames arrive in correlated runs rather than as isolated
spikes. Features are noisy interpolations between per-level cluster anchors
keyed to z. The source domain exposes continuous labels 2z - 1 in [-1, 1];
the target domain exposes quantized ordinal levels and is additionally pushed
through a fixed affine map x -> A x + b, which is the controllable domain
shift. With A = I and b = 0 the two domains agree in distribution.

Generation is deterministic: every (seed, domain, subject, sequence) tuple
seeds its own generator, so subjects are independently drawn and a dataset
regenerates bit-identically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bags import SOURCE_DOMAIN, TARGET_DOMAIN, Sequence
from .labels import DEFAULT_LEVELS, level_from_continuous

_ANCHOR_STREAM = 7919
_EPISODE_SPAN = (6, 24)
_PEAK_SPAN = (0.5, 1.0)


def make_shift(dim: int, strength: float, seed: int = 0):
    """Random invertible (A, b) whose distance from identity scales with strength.

    A is a rotation built from a random skew-symmetric S via the Cayley
    transform (I - aS)(I + aS)^-1, so it is always orthogonal: the target
    geometry stays exactly as learnable as the source's, but the feature
    directions a source-only model learned point the wrong way. b adds a
    displacement of half the strength. Strength 0 is the exact identity map.
    """
    if strength < 0:
        raise ValueError(f"shift strength must be >= 0, got {strength}")
    rng = np.random.default_rng([seed, 271828])
    raw = rng.uniform(-1.0, 1.0, (dim, dim))
    skew = strength * (raw - raw.T) / (2.0 * np.sqrt(dim))
    eye = np.eye(dim)
    scale = np.linalg.solve(eye + skew, eye - skew)
    offset = 0.5 * strength * rng.uniform(0.5, 1.0, dim) * rng.choice([-1.0, 1.0], dim)
    return scale, offset


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Recipe for one domain's dataset."""

    subjects: int = 10
    sequences_per_subject: int = 2
    frames: int = 300
    feature_dim: int = 12
    levels: int = DEFAULT_LEVELS
    event_rate: float = 0.5
    noise: float = 0.25
    shift_scale: np.ndarray | None = None   # A, defaults to identity
    shift_offset: np.ndarray | None = None  # b, defaults to zero
    seed: int = 0

    def __post_init__(self):
        if self.subjects < 1 or self.sequences_per_subject < 1:
            raise ValueError("need at least one subject and one sequence per subject")
        if self.frames < 2:
            raise ValueError(f"frames per sequence must be >= 2, got {self.frames}")
        if self.feature_dim < 1:
            raise ValueError(f"feature_dim must be >= 1, got {self.feature_dim}")
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")
        if not 0.0 <= self.event_rate <= 1.0:
            raise ValueError(f"event_rate must be in [0, 1], got {self.event_rate}")
        if self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")

    def shift(self):
        """The affine map (A, b), validated square and invertible."""
        d = self.feature_dim
        scale = np.eye(d) if self.shift_scale is None else np.asarray(
            self.shift_scale, dtype=np.float64)
        offset = np.zeros(d) if self.shift_offset is None else np.asarray(
            self.shift_offset, dtype=np.float64)
        if scale.shape != (d, d):
            raise ValueError(f"shift matrix must be {(d, d)}, got {scale.shape}")
        if offset.shape != (d,):
            raise ValueError(f"shift offset must be ({d},), got {offset.shape}")
        if np.linalg.cond(scale) > 1e8:
            raise ValueError("shift matrix is singular or near-singular")
        return scale, offset


def _latent_track(spec: DomainSpec, rng) -> np.ndarray:
    """Piecewise-linear intensity with exactly round(event_rate*frames) frames > 0."""
    budget = int(round(spec.event_rate * spec.frames))
    if budget == 0:
        return np.zeros(spec.frames)
    episodes = []
    remaining = budget
    while remaining > 0:
        span = int(rng.integers(_EPISODE_SPAN[0], _EPISODE_SPAN[1] + 1))
        span = min(span, remaining)
        peak = float(rng.uniform(*_PEAK_SPAN))
        episodes.append((span, peak))
        remaining -= span
    gaps = rng.multinomial(spec.frames - budget, [1.0 / (len(episodes) + 1)]
                           * (len(episodes) + 1))
    z = np.zeros(spec.frames)
    cursor = 0
    for (span, peak), gap in zip(episodes, gaps):
        cursor += int(gap)
        ramp = max(1, span // 3)
        profile = np.full(span, peak)
        rise = peak * np.arange(1, ramp + 1) / (ramp + 1)
        profile[:ramp] = rise
        profile[span - ramp:] = rise[::-1]
        z[cursor:cursor + span] = profile
        cursor += span
    return z


def _features_from_latent(z, anchors, noise, rng) -> np.ndarray:
    levels = anchors.shape[0]
    v = z * (levels - 1)
    lo = np.floor(v).astype(int)
    lo = np.minimum(lo, levels - 2)
    frac = (v - lo)[:, None]
    mean = (1.0 - frac) * anchors[lo] + frac * anchors[lo + 1]
    return mean + noise * rng.standard_normal(mean.shape)


def _anchors(spec: DomainSpec) -> np.ndarray:
    # Keyed by seed only, so source and target specs sharing a seed share the
    # latent-to-feature map and differ purely by the affine shift.
    rng = np.random.default_rng([spec.seed, _ANCHOR_STREAM])
    return rng.standard_normal((spec.levels, spec.feature_dim))


def _generate(spec: DomainSpec, domain: int) -> list:
    anchors = _anchors(spec)
    scale, offset = spec.shift()
    sequences = []
    for subject in range(spec.subjects):
        for index in range(spec.sequences_per_subject):
            rng = np.random.default_rng([spec.seed, domain, subject, index])
            z = _latent_track(spec, rng)
            frames = _features_from_latent(z, anchors, spec.noise, rng)
            continuous = 2.0 * z - 1.0
            if domain == SOURCE_DOMAIN:
                labels = continuous
            else:
                frames = frames @ scale.T + offset
                labels = np.array(
                    [level_from_continuous(c, spec.levels) for c in continuous],
                    dtype=np.float64)
            sequences.append(Sequence(frames=frames, frame_labels=labels,
                                      domain=domain, subject_id=subject,
                                      sequence_id=index))
    return sequences


def generate_source(spec: DomainSpec) -> list:
    """Fully-annotated source sequences with continuous labels in [-1, 1]."""
    return _generate(spec, SOURCE_DOMAIN)


def generate_target(spec: DomainSpec) -> list:
    """Shifted target sequences with ordinal frame labels 0..levels-1.

    Frame labels are carried for evaluation only; training reads target
    supervision through bag weak labels.
    """
    return _generate(spec, TARGET_DOMAIN)


# -- CSV round trip ---------------------------------------------------------
#
# One row per frame: subject, sequence, frame, f0..f{D-1}, label, domain.
# Floats are written with repr, so a load followed by a save is byte-stable
# and values round-trip exactly.

def save_csv(sequences, path) -> None:
    if not sequences:
        raise ValueError("refusing to write an empty dataset")
    dim = sequences[0].frames.shape[1]
    header = ["subject", "sequence", "frame"] + [f"f{i}" for i in range(dim)] \
        + ["label", "domain"]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for seq in sequences:
            if seq.frames.shape[1] != dim:
                raise ValueError("sequences have inconsistent feature dimensions")
            for t in range(seq.frames.shape[0]):
                row = [seq.subject_id, seq.sequence_id, t]
                row += [repr(float(v)) for v in seq.frames[t]]
                row += [repr(float(seq.frame_labels[t])), seq.domain]
                writer.writerow(row)


def load_csv(path) -> list:
    path = Path(path)
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty dataset file")
        feature_cols = [c for c in header if c.startswith("f") and c[1:].isdigit()]
        expected = ["subject", "sequence", "frame"] + feature_cols + ["label", "domain"]
        if header != expected or not feature_cols:
            raise ValueError(f"{path}: unexpected dataset header {header}")
        grouped: dict = {}
        for row in reader:
            subject, sequence, frame = int(row[0]), int(row[1]), int(row[2])
            feats = [float(v) for v in row[3:3 + len(feature_cols)]]
            label = float(row[3 + len(feature_cols)])
            domain = int(row[4 + len(feature_cols)])
            grouped.setdefault((domain, subject, sequence), []).append(
                (frame, feats, label))
    sequences = []
    for (domain, subject, sequence), rows in sorted(grouped.items()):
        rows.sort()
        frames = np.array([r[1] for r in rows], dtype=np.float64)
        labels = np.array([r[2] for r in rows], dtype=np.float64)
        sequences.append(Sequence(frames=frames, frame_labels=labels,
                                  domain=domain, subject_id=subject,
                                  sequence_id=sequence))
    return sequences

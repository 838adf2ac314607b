"""Seeded synthetic accelerometer windows for dataset-free pipeline runs.

The generator is deliberately non-physiological: normal activity is a
smooth oscillation around 1 g, and a fall is a free-fall dip followed by
an impact spike above the trigger threshold and near-still lying.  That
is enough to exercise ingestion, every feature, and every classifier,
but it makes no claim of realism.
"""

import json
from pathlib import Path

import numpy as np

from .ingest import (
    DEFAULT_RATE,
    FULL_WINDOW,
    Label,
    TriaxialWindow,
    _atomic_write_text,
)

_STREAM_SYNTH = 404


def _unit(v):
    return v / np.linalg.norm(v)


def _oscillation(rng, n):
    """Smooth activity around a gravity vector, magnitude kept below 1.4 g."""
    t = np.arange(n) / DEFAULT_RATE
    gravity = _unit(np.array([rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), 1.0]))
    axes = []
    for i in range(3):
        amp = rng.uniform(0.05, 0.3)
        freq = rng.uniform(0.5, 3.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        wobble = 0.05 * np.sin(2.0 * np.pi * freq * 1.7 * t + phase * 0.3)
        noise = 0.02 * rng.standard_normal(n)
        axes.append(gravity[i] + amp * np.sin(2.0 * np.pi * freq * t + phase) + wobble + noise)
    return np.array(axes)


def synth_adl_window(rng, n=FULL_WINDOW):
    """One activity-of-daily-living window."""
    return _oscillation(rng, n)


def synth_fall_window(rng, n=FULL_WINDOW):
    """One fall window: activity, free-fall dip, impact spike, stillness.

    The spike peak is drawn from [2.2, 3.2] g, so every fall window has a
    magnitude sample strictly above the 1.5 g trigger threshold and its
    magnitude maximum sits at the impact.
    """
    axes = _oscillation(rng, n)
    start = int(rng.integers(120, 150))
    dip = int(rng.integers(15, 25))

    # free fall: all axes collapse toward zero
    ramp = np.linspace(1.0, 0.05, dip)
    axes[:, start : start + dip] *= ramp
    axes[:, start : start + dip] += 0.03 * rng.standard_normal((3, dip))

    # impact: short spike along a random direction
    peak = float(rng.uniform(2.2, 3.2))
    direction = _unit(rng.standard_normal(3))
    profile = peak * np.array([0.45, 1.0, 0.55, 0.25])
    p0 = start + dip
    for j, mag in enumerate(profile):
        if p0 + j < n:
            axes[:, p0 + j] = mag * direction + 0.05 * rng.standard_normal(3)

    # settle into a new lying orientation with very little motion
    rest_from = min(p0 + len(profile) + int(rng.integers(5, 15)), n)
    lying = _unit(np.array([1.0, rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)]))
    rest_n = n - rest_from
    if rest_n > 0:
        axes[:, rest_from:] = lying[:, None] + 0.005 * rng.standard_normal((3, rest_n))
    # decay whatever sits between the impact tail and the resting span
    gap = slice(p0 + len(profile), rest_from)
    gap_n = axes[:, gap].shape[1]
    if gap_n > 0:
        fade = np.linspace(0.6, 0.1, gap_n)
        axes[:, gap] = lying[:, None] + fade * (axes[:, gap] - lying[:, None])
    return axes


def _window_rng(seed, label, index):
    code = 1 if label is Label.FALL else 0
    return np.random.default_rng([seed, _STREAM_SYNTH, code, index])


def synth_windows(n_adl, n_falls, seed=0):
    """In-memory labeled windows, identical to what generate_dataset writes."""
    out = []
    for i in range(n_adl):
        axes = synth_adl_window(_window_rng(seed, Label.ADL, i))
        out.append((_to_window(axes, f"adl_{i:04d}"), Label.ADL))
    for i in range(n_falls):
        axes = synth_fall_window(_window_rng(seed, Label.FALL, i))
        out.append((_to_window(axes, f"fall_{i:04d}"), Label.FALL))
    return out


def _to_window(axes, source_id):
    mag = np.sqrt((axes ** 2).sum(axis=0))
    return TriaxialWindow(
        axes[0],
        axes[1],
        axes[2],
        sample_rate=DEFAULT_RATE,
        peak_index=int(np.argmax(mag)),
        source_id=source_id,
    )


def _window_csv(axes):
    lines = [f"{x!r},{y!r},{z!r}" for x, y, z in zip(*axes.tolist())]
    return "\n".join(lines) + "\n"


def generate_dataset(out_dir, n_adl, n_falls, seed=0):
    """Write a synthetic windowed dataset1-style tree; returns the manifest."""
    root = Path(out_dir)
    (root / "adl").mkdir(parents=True, exist_ok=True)
    (root / "fall").mkdir(parents=True, exist_ok=True)
    for i in range(n_adl):
        axes = synth_adl_window(_window_rng(seed, Label.ADL, i))
        _atomic_write_text(root / "adl" / f"adl_{i:04d}.csv", _window_csv(axes))
    for i in range(n_falls):
        axes = synth_fall_window(_window_rng(seed, Label.FALL, i))
        _atomic_write_text(root / "fall" / f"fall_{i:04d}.csv", _window_csv(axes))
    manifest = {
        "mode": "windowed",
        "synthetic": True,
        "seed": seed,
        "counts": {"ADL": n_adl, "FALL": n_falls},
    }
    _atomic_write_text(root / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest

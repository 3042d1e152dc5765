"""Complex Wiener increments from counter-based generators.

Each trajectory draws from its own Philox stream keyed by (seed, index),
so results do not depend on scheduling order or worker count.  The base
stream uses a reserved index that forked trajectory streams can never
collide with.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidStepError

BASE_STREAM_TAG = 2**64 - 1


class NoiseStream:
    """Source of the complex increments driving one trajectory.

    Per step and channel the increment is z_re + i z_im with z_re, z_im
    independent N(0, dt/2), so |dxi|^2 averages to dt and dxi^2 to zero.
    """

    def __init__(self, seed: int, channel_count: int, tag: int = BASE_STREAM_TAG):
        if channel_count < 0:
            raise ValueError("channel_count must be >= 0")
        self.seed = int(seed) % 2**64
        self.channel_count = channel_count
        self.tag = int(tag)
        self._gen = np.random.Generator(np.random.Philox(key=np.array([self.seed, self.tag], dtype=np.uint64)))

    def sample_increments(self, dt: float) -> np.ndarray:
        """Draw one step's increments, shape (channel_count,) complex."""
        return self.sample_block(dt, 1)[0]

    def sample_block(self, dt: float, n_steps: int) -> np.ndarray:
        """Draw increments for n_steps consecutive steps at once.

        Consumes the generator identically to n_steps single-step calls,
        which keeps chunked integration byte-compatible with stepping.
        """
        if not (dt > 0.0) or not math.isfinite(dt):
            raise InvalidStepError(f"dt must be positive and finite, got {dt}")
        z = self._gen.standard_normal((n_steps, 2 * self.channel_count))
        z *= math.sqrt(0.5 * dt)
        return z[:, : self.channel_count] + 1j * z[:, self.channel_count :]

    def fork(self, trajectory_index: int) -> "NoiseStream":
        """Independent stream for one trajectory, keyed by (seed, index)."""
        if not 0 <= trajectory_index < BASE_STREAM_TAG:
            raise ValueError(f"trajectory_index out of range: {trajectory_index}")
        return NoiseStream(self.seed, self.channel_count, tag=trajectory_index)

    def __repr__(self):
        return f"NoiseStream(seed={self.seed}, channels={self.channel_count}, tag={self.tag})"


def sample_increments(stream: NoiseStream, dt: float) -> np.ndarray:
    return stream.sample_increments(dt)


def fork_stream(stream: NoiseStream, trajectory_index: int) -> NoiseStream:
    return stream.fork(trajectory_index)


class MomentCheck:
    """One empirical moment with its target and allowed deviation."""

    __slots__ = ("name", "value", "target", "tolerance")

    def __init__(self, name, value, target, tolerance):
        self.name = name
        self.value = float(value)
        self.target = float(target)
        self.tolerance = float(tolerance)

    @property
    def ok(self) -> bool:
        return abs(self.value - self.target) <= self.tolerance

    def __repr__(self):
        flag = "ok" if self.ok else "FAIL"
        return (f"{self.name}: {self.value:.6g} (target {self.target:.6g} "
                f"+- {self.tolerance:.3g}) {flag}")


def moment_suite(seed: int, dt: float = 0.01, samples: int = 1_000_000,
                 channels: int = 2) -> list[MomentCheck]:
    """Empirical checks of the increment statistics at fixed seed.

    Covers per-component means and variances, the vanishing of the squared
    increment, the |dxi|^2 = dt normalization, cross-channel independence,
    and independence of two forked streams.  Mean-like quantities get
    4-standard-error windows; variances get a 1% relative window.
    """
    stream = NoiseStream(seed, channels)
    block = stream.sample_block(dt, samples)
    root_n = math.sqrt(samples)
    checks = []

    se_mean = math.sqrt(0.5 * dt) / root_n
    for c in range(channels):
        z = block[:, c]
        checks.append(MomentCheck(f"mean_re[{c}]", z.real.mean(), 0.0, 4 * se_mean))
        checks.append(MomentCheck(f"mean_im[{c}]", z.imag.mean(), 0.0, 4 * se_mean))
        checks.append(MomentCheck(f"var_re[{c}]", z.real.var(), 0.5 * dt, 0.01 * 0.5 * dt))
        checks.append(MomentCheck(f"var_im[{c}]", z.imag.var(), 0.5 * dt, 0.01 * 0.5 * dt))
        sq = z * z
        checks.append(MomentCheck(f"sq_re[{c}]", sq.real.mean(), 0.0, 4 * dt / root_n))
        checks.append(MomentCheck(f"sq_im[{c}]", sq.imag.mean(), 0.0, 4 * dt / root_n))
        checks.append(MomentCheck(f"abs2[{c}]", (np.abs(z) ** 2).mean(), dt, 4 * dt / root_n))

    se_cross = dt / math.sqrt(2 * samples)
    for c in range(channels - 1):
        prod = block[:, c] * block[:, c + 1].conj()
        checks.append(MomentCheck(f"cross_re[{c},{c+1}]", prod.real.mean(), 0.0, 4 * se_cross))
        checks.append(MomentCheck(f"cross_im[{c},{c+1}]", prod.imag.mean(), 0.0, 4 * se_cross))

    fork_a = stream.fork(0).sample_block(dt, samples)[:, 0]
    fork_b = stream.fork(1).sample_block(dt, samples)[:, 0]
    prod = fork_a * fork_b.conj()
    checks.append(MomentCheck("fork_cross_re", prod.real.mean(), 0.0, 4 * se_cross))
    checks.append(MomentCheck("fork_cross_im", prod.imag.mean(), 0.0, 4 * se_cross))
    return checks

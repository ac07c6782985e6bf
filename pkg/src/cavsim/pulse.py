"""Time grids, pulse envelopes and their inner product.

All times are in units of 1/kappa. Envelope samples sit at bin centres,
``t_i = t_start + (i + 1/2) dt``, and the inner product is the midpoint rule
``sum(conj(a) * b) * dt``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .errors import InvalidArgumentError

SETTLE_WINDOW = 15.0


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    dt: float
    n_bins: int

    def __post_init__(self):
        if not (self.dt > 0) or not math.isfinite(self.dt):
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if int(self.n_bins) != self.n_bins or self.n_bins < 2:
            raise InvalidArgumentError(f"n_bins must be an integer >= 2, got {self.n_bins}")
        object.__setattr__(self, "n_bins", int(self.n_bins))
        object.__setattr__(self, "t_start", float(self.t_start))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def span(self) -> float:
        return self.dt * self.n_bins

    @property
    def t_end(self) -> float:
        return self.t_start + self.span

    @property
    def centers(self) -> np.ndarray:
        return self.t_start + (np.arange(self.n_bins) + 0.5) * self.dt

    def refined(self, levels: int = 1) -> "TimeGrid":
        """Same span with ``dt`` halved ``levels`` times."""
        factor = 2**levels
        return TimeGrid(self.t_start, self.dt / factor, self.n_bins * factor)


def make_grid(t_start: float, dt: float, n_bins: int) -> TimeGrid:
    return TimeGrid(t_start, dt, n_bins)


class Envelope:
    """Complex field amplitude per time bin (units 1/sqrt(time)).

    Instances are immutable: the sample array is copied and write-protected.
    """

    __slots__ = ("grid", "samples")

    def __init__(self, grid: TimeGrid, samples):
        arr = np.array(samples, dtype=complex)
        if arr.shape != (grid.n_bins,):
            raise InvalidArgumentError(
                f"envelope needs {grid.n_bins} samples, got shape {arr.shape}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "samples", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Envelope is immutable")

    def __repr__(self):
        return f"Envelope(grid={self.grid!r}, norm2={self.norm2():.6g})"

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.dt)

    def norm(self) -> float:
        return math.sqrt(self.norm2())

    def scaled(self, factor: complex) -> "Envelope":
        return Envelope(self.grid, self.samples * factor)

    def normalized(self) -> "Envelope":
        n = self.norm()
        if n == 0.0:
            raise InvalidArgumentError("cannot normalize a zero envelope")
        return self.scaled(1.0 / n)

    def __add__(self, other: "Envelope") -> "Envelope":
        _check_same_grid(self, other)
        return Envelope(self.grid, self.samples + other.samples)

    def __sub__(self, other: "Envelope") -> "Envelope":
        _check_same_grid(self, other)
        return Envelope(self.grid, self.samples - other.samples)

    def same_as(self, other: "Envelope") -> bool:
        """Exact sample-wise equality on the same grid."""
        return self is other or (
            self.grid == other.grid and np.array_equal(self.samples, other.samples)
        )

    def coarsened(self, levels: int = 1) -> "Envelope":
        """Block-average onto a grid with ``dt`` doubled ``levels`` times."""
        factor = 2**levels
        g = self.grid
        if g.n_bins % factor:
            raise InvalidArgumentError("n_bins not divisible by coarsening factor")
        coarse = TimeGrid(g.t_start, g.dt * factor, g.n_bins // factor)
        return Envelope(coarse, self.samples.reshape(-1, factor).mean(axis=1))

    # serialization: header t,re,im, 12 significant digits
    def to_text(self) -> str:
        buf = io.StringIO()
        write_envelope(self, buf)
        return buf.getvalue()


@dataclass(frozen=True)
class PulseSpec:
    T: float
    shape: str = "gaussian_paper"

    def __post_init__(self):
        if not (self.T > 0):
            raise InvalidArgumentError(f"pulse duration T must be positive, got {self.T}")
        if self.shape not in ("gaussian_paper", "custom"):
            raise InvalidArgumentError(f"unknown pulse shape {self.shape!r}")

    @property
    def width(self) -> float:
        return self.T / 5.0


def _check_same_grid(a: Envelope, b: Envelope):
    if a.grid != b.grid:
        raise InvalidArgumentError(f"grid mismatch: {a.grid} vs {b.grid}")


def inner_product(a: Envelope, b: Envelope) -> complex:
    """``sum(conj(a_i) * b_i) * dt``."""
    _check_same_grid(a, b)
    return complex(np.vdot(a.samples, b.samples) * a.grid.dt)


def gaussian_samples(t, T: float) -> np.ndarray:
    """Truncated Gaussian exp(-(t - T/2)^2 / (T/5)^2) on [0, T], unnormalized."""
    t = np.asarray(t, dtype=float)
    inside = (t >= 0.0) & (t <= T)
    return np.where(inside, np.exp(-(((t - T / 2) / (T / 5)) ** 2)), 0.0)


def make_gaussian_pulse(spec: PulseSpec, grid: TimeGrid) -> Envelope:
    if spec.shape != "gaussian_paper":
        raise InvalidArgumentError("make_gaussian_pulse requires shape='gaussian_paper'")
    # half-bin slack: midpoint samples cover [t_start, t_end]
    if grid.t_start > 0.5 * grid.dt or grid.t_end < spec.T - 0.5 * grid.dt:
        raise InvalidArgumentError(
            f"grid [{grid.t_start}, {grid.t_end}) does not cover the pulse [0, {spec.T}]"
        )
    samples = gaussian_samples(grid.centers, spec.T)
    norm2 = np.sum(samples**2) * grid.dt
    if norm2 == 0.0:
        raise InvalidArgumentError("grid too coarse: no samples inside the pulse")
    return Envelope(grid, samples / math.sqrt(norm2))


def step_rule_dt(rates, T: float) -> float:
    """Largest step allowed by dt <= 1 / (20 max(rates..., 5/T))."""
    fastest = max([abs(r) for r in rates] + [5.0 / T])
    return 1.0 / (20.0 * fastest)


def pulse_grid(T: float, dt_max: float, settle: float = SETTLE_WINDOW, refine: int = 0) -> TimeGrid:
    """Grid starting at 0 with T an exact multiple of dt, plus a settle window.

    The pulse edges then fall on bin edges, which keeps the truncation jump
    of the Gaussian out of the interior of any integration step.
    """
    n_pulse = max(2, math.ceil(T / dt_max - 1e-9))
    dt = T / n_pulse
    n_settle = math.ceil(settle / dt - 1e-9)
    return TimeGrid(0.0, dt, n_pulse + n_settle).refined(refine)


def write_envelope(env: Envelope, stream: TextIO):
    stream.write("t,re,im\n")
    for t, z in zip(env.grid.centers, env.samples):
        stream.write(f"{t:.12g},{z.real:.12g},{z.imag:.12g}\n")


def read_envelope(stream: TextIO) -> Envelope:
    """Parse the ``t,re,im`` format; the grid is recovered from the time column."""
    rows = [ln for ln in stream.read().splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows or rows[0].strip() != "t,re,im":
        raise InvalidArgumentError("expected header 't,re,im'")
    data = np.array([[float(x) for x in ln.split(",")] for ln in rows[1:]])
    t = data[:, 0]
    dt = (t[-1] - t[0]) / (len(t) - 1)
    grid = TimeGrid(t[0] - dt / 2, dt, len(t))
    return Envelope(grid, data[:, 1] + 1j * data[:, 2])

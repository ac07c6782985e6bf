"""Frequency-domain solution of the same scattering problem.

Writing the envelope as f(t) = int F(w) exp(-i w t) dw, the steady state of
the amplitude equations at frequency w gives

    r(w) = 1 - kappa / [ (kappa/2 - i w + i Delta) + g^2 / (gamma_s/2 - i w) ]

For g = 0 this is (i(Delta - w) - kappa/2) / (i(Delta - w) + kappa/2). In
the literal loss model the coupled branch sees kappa/2 -> (kappa - gamma_s)/2
in the cavity pole. numpy's FFT uses exp(+2 pi i k n / N) for synthesis, so
its frequency bins map to w = -2 pi * fftfreq.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidArgumentError
from .params import AtomLabel, CavityParams
from .pulse import Envelope, inner_product
from .scattering import ReflectionResult, wrap_phase

PAD_FACTOR = 4


def reflection_coefficient(omega, atom: AtomLabel, params: CavityParams):
    """Complex reflection coefficient r(omega); vectorised over ``omega``."""
    w = np.asarray(omega, dtype=float)
    atom = AtomLabel(atom)
    kappa = params.kappa
    cavity_rate = kappa / 2
    if atom == AtomLabel.G1 and params.loss_model == "paper_literal":
        cavity_rate -= params.gamma_s / 2
    cav = cavity_rate + 1j * (params.delta - w)
    if atom == AtomLabel.G0 or params.g == 0.0:
        r = 1 - kappa / cav
    else:
        # on the atomic pole (gamma_s = 0, w = 0) the atom blocks the cavity: r = 1
        atom_den = np.asarray(params.gamma_s / 2 - 1j * w)
        on_pole = atom_den == 0
        with np.errstate(invalid="ignore", divide="ignore"):
            cleared = 1 - kappa * atom_den / (cav * atom_den + params.g**2)
        r = np.where(on_pole, 1.0 + 0j, cleared)
    r = np.asarray(r)
    return r if r.ndim else complex(r)


def angular_frequencies(n: int, dt: float) -> np.ndarray:
    """Angular frequency of each FFT bin in the exp(-i w t) convention."""
    return -2 * math.pi * np.fft.fftfreq(n, dt)


def reflect_spectral(input: Envelope, atom: AtomLabel, params: CavityParams) -> ReflectionResult:
    """Filter the input by r(omega) on a zero-padded periodic grid.

    ``loss_prob`` is the norm deficit over the whole padded window (so any
    tail ringing out past the grid end counts as reflected, not lost);
    ``residual_excitation`` is zero by construction.
    """
    f = np.asarray(input.samples)
    n = len(f)
    npad = PAD_FACTOR * n
    spectrum = np.fft.fft(f, npad)
    r = reflection_coefficient(angular_frequencies(npad, input.grid.dt), atom, params)
    full = np.fft.ifft(spectrum * r)
    if not np.all(np.isfinite(full)):
        raise InvalidArgumentError("reflection coefficient is singular on this grid")
    out = Envelope(input.grid, full[:n])
    loss = input.norm2() - float(np.sum(np.abs(full) ** 2) * input.grid.dt)
    ov = inner_product(input, out)
    phase = wrap_phase(math.atan2(ov.imag, ov.real)) if ov != 0 else 0.0
    return ReflectionResult(out, loss, 0.0, phase, ov)


def narrowband_loss(atom: AtomLabel, params: CavityParams) -> float:
    """Loss 1 - |r(0)|^2 of a monochromatic resonant input."""
    return 1.0 - abs(reflection_coefficient(0.0, atom, params)) ** 2


def rcoeff_table(omegas, atom: AtomLabel, params: CavityParams) -> dict:
    """Columns ``omega, re, im, abs, arg`` of r sampled on ``omegas``."""
    w = np.asarray(omegas, dtype=float)
    r = np.atleast_1d(reflection_coefficient(w, atom, params))
    return {
        "omega": w,
        "re": r.real,
        "im": r.imag,
        "abs": np.abs(r),
        "arg": np.angle(r),
    }

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavsim.experiments import gaussian_on_default_grid
from cavsim.params import AtomLabel, CavityParams
from cavsim.pulse import Envelope, inner_product
from cavsim.scattering import reflect, system_matrix
from cavsim.spectral import (
    angular_frequencies,
    narrowband_loss,
    rcoeff_table,
    reflect_spectral,
    reflection_coefficient,
)

G0, G1 = AtomLabel.G0, AtomLabel.G1


def steady_state_r(omega, atom, params):
    """r from the time-domain generator: f = exp(-i w t) gives Y = -(A + i w)^-1 b."""
    A, b = system_matrix(atom, params)
    y = np.linalg.solve(A + 1j * omega * np.eye(len(b)), -b)
    return 1 + math.sqrt(params.kappa) * y[0]


def test_examples():
    assert reflection_coefficient(0.0, G0, CavityParams()) == pytest.approx(-1)
    for g in (0.5, 3.0, 6.0):
        assert reflection_coefficient(0.0, G1, CavityParams(g=g, gamma_s=0.0)) == pytest.approx(1)
    assert reflection_coefficient(0.0, G0, CavityParams(delta=0.5)) == pytest.approx(1j)


def test_scalar_and_vector():
    p = CavityParams()
    assert isinstance(reflection_coefficient(0.3, G1, p), complex)
    w = np.linspace(-2, 2, 5)
    assert reflection_coefficient(w, G1, p).shape == (5,)


@pytest.mark.parametrize("loss_model", ["standard_decay", "paper_literal"])
def test_closed_form_matches_generator(loss_model):
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = CavityParams(
            g=rng.uniform(0, 6), gamma_s=rng.uniform(0, 2), delta=rng.uniform(-1, 1), loss_model=loss_model
        )
        w = rng.uniform(-4, 4)
        for atom in (G0, G1):
            assert abs(reflection_coefficient(w, atom, p) - steady_state_r(w, atom, p)) < 1e-12


def test_closed_form_matches_time_domain_at_random_points():
    # a long carrier-modulated pulse probes r at the carrier frequency
    rng = np.random.default_rng(2024)
    T = 800.0
    for _ in range(3):
        p = CavityParams(g=rng.uniform(0.5, 4), gamma_s=rng.uniform(0.2, 1.5), delta=rng.uniform(-0.5, 0.5))
        w = rng.uniform(-1.5, 1.5)
        base = gaussian_on_default_grid(T, p.replace(delta=p.delta + abs(w)))
        f = Envelope(base.grid, base.samples * np.exp(-1j * w * base.grid.centers))
        r_td = inner_product(f, reflect(f, G1, p).out)
        assert abs(r_td - reflection_coefficient(w, G1, p)) < 2e-3


@given(
    st.floats(0, 8), st.floats(0, 4), st.floats(-3, 3), st.floats(-20, 20), st.sampled_from([G0, G1])
)
@settings(max_examples=200, deadline=None)
def test_passive_bound(g, gamma, delta, w, atom):
    r = reflection_coefficient(w, atom, CavityParams(g=g, gamma_s=gamma, delta=delta))
    assert abs(r) <= 1 + 1e-12


@given(st.floats(0, 8), st.floats(-3, 3), st.floats(-20, 20))
@settings(max_examples=200, deadline=None)
def test_lossless_all_pass(g, delta, w):
    r = reflection_coefficient(w, G1, CavityParams(g=g, gamma_s=0.0, delta=delta))
    assert abs(abs(r) - 1) < 1e-12


@given(st.floats(0, 8), st.floats(0, 4), st.floats(0, 20))
@settings(max_examples=100, deadline=None)
def test_conjugate_symmetry_on_resonance(g, gamma, w):
    p = CavityParams(g=g, gamma_s=gamma)
    for atom in (G0, G1):
        assert reflection_coefficient(-w, atom, p) == reflection_coefficient(w, atom, p).conjugate()


def test_narrowband_loss_closed_form():
    # 1 - r1(0)^2 = 4y/(1+y)^2, y = 4 g^2 / (kappa gamma_s)
    for g, gam in [(0.5, 1.0), (3.0, 1.0), (25 / 8, 5.2 / 8)]:
        y = 4 * g**2 / gam
        assert narrowband_loss(G1, CavityParams(g=g, gamma_s=gam)) == pytest.approx(4 * y / (1 + y) ** 2, rel=1e-12)


def test_frequency_convention():
    # a pure exp(-i w t) tone lands in the bin whose angular frequency is w
    n, dt = 64, 0.5
    w = angular_frequencies(n, dt)
    k = 5
    t = np.arange(n) * dt
    spectrum = np.fft.fft(np.exp(-1j * w[k] * t))
    assert int(np.argmax(np.abs(spectrum))) == k


def test_lossless_norm_preserved(pulse60):
    p = CavityParams(g=2.0, gamma_s=0.0, delta=0.3)
    for atom in (G0, G1):
        r = reflect_spectral(pulse60, atom, p)
        assert abs(r.loss_prob) < 1e-10
        assert r.residual_excitation == 0.0


def test_atom0_spectral_phase(pulse240, fig_params):
    r = reflect_spectral(pulse240, G0, fig_params)
    assert abs(r.conditional_phase - math.pi) < 1e-3 or abs(r.conditional_phase + math.pi) < 1e-3


ORACLE_MATRIX = list(itertools.product([0.0, 1.0, 3.0, 6.0], [0.0, 1.0], [0.0, 0.5]))


@pytest.mark.parametrize("T", [60.0, 120.0, 240.0])
def test_oracle_equivalence_matrix(T):
    params = [CavityParams(g=g, gamma_s=gam, delta=d) for g, gam, d in ORACLE_MATRIX]
    for p in params:
        f = gaussian_on_default_grid(T, p)
        for atom in (G0, G1):
            a, b = reflect(f, atom, p), reflect_spectral(f, atom, p)
            assert (a.out - b.out).norm() < 1e-3
            assert abs(a.loss_prob - b.loss_prob) < 1e-4


def test_narrowband_limit_monotone(fig_params):
    r0 = reflection_coefficient(0.0, G1, fig_params)
    errs = []
    for T in (30.0, 60.0, 120.0, 240.0):
        f = gaussian_on_default_grid(T, fig_params)
        errs.append(abs(reflect_spectral(f, G1, fig_params).overlap - r0))
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_rcoeff_table_columns():
    w = np.linspace(-1, 1, 7)
    tab = rcoeff_table(w, G1, CavityParams())
    assert list(tab) == ["omega", "re", "im", "abs", "arg"]
    assert np.allclose(tab["abs"], np.hypot(tab["re"], tab["im"]))

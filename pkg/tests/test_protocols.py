import itertools
import math

import numpy as np
import pytest

from cavsim.errors import InvalidArgumentError, UndefinedFidelityError
from cavsim.params import AtomLabel, CavityParams
from cavsim.protocols import (
    PHI_AI,
    AtomQubit,
    JointState,
    PhotonQubit,
    Term,
    apply_ideal_cpf_jk,
    atom_photon_gate_report,
    conditional_fidelity,
    cpf_atom_photon,
    cpf_photon_photon,
    flip_polarization,
    gate_phase_table,
    product_state,
    qnd_parity,
    qnd_photon_number,
    qnd_total_number,
    rotate_atom,
)
from cavsim.pulse import inner_product
from cavsim.scattering import reflect

G0, G1 = AtomLabel.G0, AtomLabel.G1


# independent 8x8 oracle on |atom, pol_j, pol_k>, h = 0, atom most significant
def u_atom_photon(j):
    d = np.ones(8, dtype=complex)
    for idx in range(8):
        atom, pj = idx >> 2, (idx >> (1 - j)) & 1
        if atom == 0 and pj == 0:
            d[idx] = -1
    return np.diag(d)


def r_atom(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.kron(np.array([[c, -s], [s, c]]), np.eye(4))


U_CPF = np.kron(np.eye(2), np.diag([-1, 1, 1, 1]).astype(complex))
PHI = np.array([1, 1]) / math.sqrt(2)


def joint_from_vector(vec, shape):
    branches = {}
    for idx, amp in enumerate(vec):
        if amp != 0:
            atom, pj, pk = idx >> 2, (idx >> 1) & 1, idx & 1
            branches[(atom, ("hv"[pj], "hv"[pk]))] = [Term(complex(amp), (shape, shape))]
    return JointState(branches)


def test_matrix_oracle_reproduces_identity():
    seq = u_atom_photon(0) @ r_atom(-math.pi / 2) @ u_atom_photon(1) @ r_atom(math.pi / 2) @ u_atom_photon(0)
    rng = np.random.default_rng(0)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    full = np.kron(PHI, psi)
    assert np.allclose(seq @ full, U_CPF @ full, atol=1e-14)


def test_five_step_sequence_on_random_states(pulse60):
    rng = np.random.default_rng(12345)
    for _ in range(50):
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)
        full = np.kron(PHI, psi)
        out, report = cpf_photon_photon(joint_from_vector(full, pulse60), mode="ideal")
        expected = U_CPF @ full
        assert np.linalg.norm(out.as_vector() - expected) < 1e-12
        assert report.conditional_fidelity == pytest.approx(1, abs=1e-12)


def test_ideal_two_photon_gate_matrix(pulse60):
    phases = gate_phase_table(pulse60, 2)
    assert phases["hh"] == pytest.approx(math.pi)
    for k in ("hv", "vh", "vv"):
        assert phases[k] == pytest.approx(0, abs=1e-14)
    for pols in itertools.product("hv", repeat=2):
        photons = [PhotonQubit.h(pulse60) if p == "h" else PhotonQubit.v(pulse60) for p in pols]
        psi = product_state(PHI_AI, photons)
        out, _ = cpf_photon_photon(psi)
        sign = -1 if pols == ("h", "h") else 1
        assert np.allclose(out.as_vector(), sign * psi.as_vector(), atol=1e-14)


def test_entangling_pattern_and_atom_disentangled(pulse60):
    d = PhotonQubit.diagonal(pulse60)
    psi = product_state(PHI_AI, [d, d])
    out, _ = cpf_photon_photon(psi)
    vec = out.as_vector()
    expected = np.kron(PHI, np.array([-1, 1, 1, 1]) / 2)
    assert np.allclose(vec, expected, atol=1e-14)
    photons = vec.reshape(2, 4)
    assert np.linalg.matrix_rank(photons, tol=1e-12) == 1


def test_cpf_requires_phi_ai(pulse60):
    psi = product_state(AtomQubit(1, 0), [PhotonQubit.h(pulse60), PhotonQubit.h(pulse60)])
    with pytest.raises(InvalidArgumentError):
        cpf_photon_photon(psi)


def test_rotations(pulse60):
    zero = product_state(AtomQubit(1, 0), [PhotonQubit.h(pulse60)])
    flipped = rotate_atom(zero, math.pi)
    assert flipped.amplitude(1, ("h",)) == pytest.approx(1)
    assert abs(flipped.amplitude(0, ("h",))) < 1e-15
    half = rotate_atom(zero, math.pi / 2)
    assert half.amplitude(0, ("h",)) == pytest.approx(1 / math.sqrt(2))
    assert half.amplitude(1, ("h",)) == pytest.approx(1 / math.sqrt(2))
    psi = product_state(AtomQubit(0.6, 0.8j), [PhotonQubit.diagonal(pulse60)])
    back = rotate_atom(rotate_atom(psi, math.pi / 2), -math.pi / 2)
    assert np.allclose(back.as_vector(), psi.as_vector(), atol=1e-12)


def test_ideal_atom_photon_cpf(pulse60):
    s = product_state(AtomQubit(1, 0), [PhotonQubit.h(pulse60)])
    assert cpf_atom_photon(s, 0).amplitude(0, ("h",)) == -1
    for ph in (PhotonQubit.h(pulse60), PhotonQubit.v(pulse60), PhotonQubit.diagonal(pulse60)):
        s = product_state(AtomQubit(0, 1), [ph])
        assert np.array_equal(cpf_atom_photon(s, 0).as_vector(), s.as_vector())


def test_bad_pulse_index_and_mode(pulse60):
    s = product_state(PHI_AI, [PhotonQubit.h(pulse60)])
    with pytest.raises(InvalidArgumentError):
        cpf_atom_photon(s, 1)
    with pytest.raises(InvalidArgumentError):
        cpf_atom_photon(s, 0, mode="noisy")


def test_simulated_lossless_close_to_ideal(pulse240):
    p = CavityParams(g=3.0, gamma_s=0.0)
    psi = product_state(PHI_AI, [PhotonQubit.diagonal(pulse240)])
    actual = cpf_atom_photon(psi, 0, p, "simulated")
    ideal = cpf_atom_photon(psi, 0)
    report = conditional_fidelity(actual, ideal)
    assert 1 - report.conditional_fidelity < 1e-3
    assert abs(actual.bookkeeping_error()) < 1e-8


def test_fidelity_examples(pulse60):
    psi = product_state(PHI_AI, [PhotonQubit.diagonal(pulse60)])
    ideal = cpf_atom_photon(psi, 0)
    assert conditional_fidelity(ideal, ideal).conditional_fidelity == pytest.approx(1)
    # flip only the (g0, h) branch of the ideal output: overlap 3/4 - 1/4
    flipped = {k: ([Term(-t.amplitude, t.envelopes) for t in v] if k == (G0, ("h",)) else v)
               for k, v in ideal.branches.items()}
    report = conditional_fidelity(JointState(flipped), ideal)
    assert report.conditional_fidelity == pytest.approx(0.5, abs=1e-14)


def test_fidelity_zero_norm(pulse60):
    psi = product_state(PHI_AI, [PhotonQubit.h(pulse60)])
    empty = JointState({}, lost_weight=1.0)
    with pytest.raises(UndefinedFidelityError):
        conditional_fidelity(empty, psi)


def test_atom_photon_gate_fidelity(pulse240, fig_params):
    _, report = atom_photon_gate_report(fig_params, pulse240)
    assert report.conditional_fidelity == pytest.approx(0.999, abs=5e-4)
    assert report.success_prob + report.lost_weight == pytest.approx(1, abs=1e-8)
    assert report.process_fidelity == pytest.approx(report.conditional_fidelity**2)


def test_leakage_is_weighted_branch_loss(pulse240, fig_params):
    psi = product_state(PHI_AI, [PhotonQubit.diagonal(pulse240)])
    actual = cpf_atom_photon(psi, 0, fig_params, "simulated")
    r1 = reflect(pulse240, G1, fig_params)
    r0 = reflect(pulse240, G0, fig_params)
    lost1 = r1.loss_prob + r1.residual_excitation
    lost0 = r0.loss_prob + r0.residual_excitation
    assert actual.lost_weight == pytest.approx(lost1 / 4 + lost0 / 4, abs=1e-12)
    # the empty-cavity branch loses nothing, so P_e = P_s / 4 applies
    assert lost0 < 1e-4 * r1.loss_prob
    assert abs(actual.lost_weight - r1.loss_prob / 4) < 1e-6


@pytest.mark.parametrize("solver", ["time", "spectral"])
def test_simulated_bookkeeping_every_step(pulse60, fig_params, solver):
    d = PhotonQubit.diagonal(pulse60)
    s = product_state(PHI_AI, [d, d])
    steps = [
        lambda s: cpf_atom_photon(s, 0, fig_params, "simulated", solver),
        lambda s: rotate_atom(s, math.pi / 2),
        lambda s: cpf_atom_photon(s, 1, fig_params, "simulated", solver),
        lambda s: rotate_atom(s, -math.pi / 2),
        lambda s: cpf_atom_photon(s, 0, fig_params, "simulated", solver),
    ]
    for step in steps:
        s = step(s)
        assert abs(s.bookkeeping_error()) < 1e-8


def test_qnd_photon_number_truth_table(pulse60):
    assert qnd_photon_number(PhotonQubit.h(pulse60)).probabilities["0"] == pytest.approx(1)
    res = qnd_photon_number(PhotonQubit.v(pulse60))
    assert res.probabilities["0"] == pytest.approx(0, abs=1e-15)
    assert res.probabilities["1"] == pytest.approx(1)


def test_qnd_superposition_and_no_demolition(pulse60):
    res = qnd_photon_number(PhotonQubit.diagonal(pulse60))
    assert abs(res.probabilities["0"] - 0.5) < 1e-10
    post = res.post_states["0"]
    assert post.weight((G0, ("h",))) == pytest.approx(1, abs=1e-12)
    assert post.weight((G0, ("v",))) < 1e-24
    for t in post.branches[(G0, ("h",))]:
        assert abs(abs(inner_product(pulse60, t.envelopes[0])) - 1) < 1e-10


def test_qnd_parity(pulse60):
    h, v = PhotonQubit.h(pulse60), PhotonQubit.v(pulse60)
    assert qnd_parity([h, h]).probabilities["even"] == pytest.approx(1)
    assert qnd_parity([h, v]).probabilities["odd"] == pytest.approx(1)
    assert qnd_parity([v, v]).probabilities["even"] == pytest.approx(1)
    assert qnd_parity([h, h, h]).probabilities["odd"] == pytest.approx(1)
    with pytest.raises(InvalidArgumentError):
        qnd_parity([])


def test_qnd_total_number(pulse60):
    assert qnd_total_number(PhotonQubit.vacuum(pulse60)).probabilities[0] == pytest.approx(1)
    assert qnd_total_number(PhotonQubit.v(pulse60)).probabilities[1] == pytest.approx(1)
    assert qnd_total_number(PhotonQubit.h(pulse60)).probabilities[1] == pytest.approx(1)
    res = qnd_total_number(PhotonQubit.diagonal(pulse60))
    assert res.probabilities[1] == pytest.approx(1)
    # the final flip restores the input polarization
    post = res.post_states[1]
    assert post.weight((G0, ("h",))) == pytest.approx(0.5)
    assert post.weight((G0, ("v",))) == pytest.approx(0.5)


def test_qnd_simulated_leaks(pulse240, fig_params):
    res = qnd_photon_number(PhotonQubit.h(pulse240), fig_params, "simulated")
    total = sum(res.probabilities.values()) + res.lost
    assert total == pytest.approx(1, abs=1e-8)
    assert 0 < res.lost < 0.1


def test_flip_polarization_involution(pulse60):
    psi = product_state(PHI_AI, [PhotonQubit(0.6, 0.8j, pulse60)])
    twice = flip_polarization(flip_polarization(psi, 0), 0)
    assert np.array_equal(twice.as_vector(), psi.as_vector())


def test_ideal_cpf_jk_helper(pulse60):
    d = PhotonQubit.diagonal(pulse60)
    psi = product_state(PHI_AI, [d, d])
    out = apply_ideal_cpf_jk(psi)
    assert out.amplitude(0, ("h", "h")) == pytest.approx(-psi.amplitude(0, ("h", "h")))


def test_photon_qubit_validation(pulse60):
    with pytest.raises(InvalidArgumentError):
        PhotonQubit(1.0, 1.0, pulse60)
    with pytest.raises(InvalidArgumentError):
        AtomQubit(1.0, 1.0)

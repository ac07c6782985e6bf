"""Atom-photon and photon-photon CPF gates, and QND measurement protocols.

A :class:`JointState` stores the atom (|0> or |1>) plus the polarization of
each pulse ('h', 'v' or 'vac') as a branch key. Each key holds one or more
product terms ``amplitude * env_1 (x) env_2 (x) ...``. In ideal mode the
envelopes never change and every key carries a single term. In simulated mode
a reflection replaces the envelope with the cavity output for that branch's
atom, and an atomic rotation can then superpose terms with different
envelopes under one key.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidArgumentError, UndefinedFidelityError
from .params import AtomLabel, CavityParams
from .pulse import Envelope, inner_product
from .scattering import reflect, wrap_phase
from .spectral import reflect_spectral

POLARIZATIONS = ("h", "v", "vac")
MODES = ("ideal", "simulated")


@dataclass(frozen=True)
class PhotonQubit:
    """Polarization qubit of one pulse; ``c_vac`` allows the vacuum input."""

    c_h: complex
    c_v: complex
    shape: Envelope
    c_vac: complex = 0.0

    def __post_init__(self):
        total = abs(self.c_h) ** 2 + abs(self.c_v) ** 2 + abs(self.c_vac) ** 2
        if abs(total - 1.0) > 1e-10:
            raise InvalidArgumentError(f"photon amplitudes not normalized: {total}")

    @classmethod
    def h(cls, shape):
        return cls(1.0, 0.0, shape)

    @classmethod
    def v(cls, shape):
        return cls(0.0, 1.0, shape)

    @classmethod
    def diagonal(cls, shape):
        return cls(1 / math.sqrt(2), 1 / math.sqrt(2), shape)

    @classmethod
    def vacuum(cls, shape):
        return cls(0.0, 0.0, shape, 1.0)

    def amplitudes(self):
        return {"h": self.c_h, "v": self.c_v, "vac": self.c_vac}


@dataclass(frozen=True)
class AtomQubit:
    a0: complex
    a1: complex

    def __post_init__(self):
        if abs(self.a0) ** 2 + abs(self.a1) ** 2 > 1 + 1e-12:
            raise InvalidArgumentError("atom amplitudes exceed unit norm")


PHI_AI = AtomQubit(1 / math.sqrt(2), 1 / math.sqrt(2))


@dataclass(frozen=True, eq=False)
class Term:
    amplitude: complex
    envelopes: tuple


def _same_envelopes(a: Term, b: Term) -> bool:
    return all(x.same_as(y) for x, y in zip(a.envelopes, b.envelopes))


def _merge(terms) -> tuple:
    merged: list[Term] = []
    for t in terms:
        for i, m in enumerate(merged):
            if _same_envelopes(m, t):
                merged[i] = Term(m.amplitude + t.amplitude, m.envelopes)
                break
        else:
            merged.append(t)
    return tuple(t for t in merged if t.amplitude != 0)


def _terms_inner(left, right) -> complex:
    total = 0j
    for a in left:
        for b in right:
            prod = np.conj(a.amplitude) * b.amplitude
            for ea, eb in zip(a.envelopes, b.envelopes):
                prod *= ea.norm2() if ea is eb else inner_product(ea, eb)
            total += prod
    return complex(total)


class JointState:
    """Branch-decomposed atom (x) photons state plus lost (leaked) weight."""

    def __init__(self, branches: Mapping, lost_weight: float = 0.0):
        clean = {}
        for (atom, pols), terms in branches.items():
            key = (AtomLabel(atom), tuple(pols))
            if any(p not in POLARIZATIONS for p in key[1]):
                raise InvalidArgumentError(f"bad polarization labels {key[1]}")
            if key in clean:
                raise InvalidArgumentError(f"duplicate branch key {key}")
            terms = _merge(terms)
            if terms:
                clean[key] = terms
        self.branches: dict = clean
        self.lost_weight = float(lost_weight)

    def __repr__(self):
        parts = [
            f"{int(a)}|{''.join(p)}: {[complex(np.round(t.amplitude, 6)) for t in ts]}"
            for (a, p), ts in sorted(self.branches.items())
        ]
        return f"JointState({', '.join(parts)}; lost={self.lost_weight:.3g})"

    @property
    def n_pulses(self) -> int:
        return len(next(iter(self.branches))[1]) if self.branches else 0

    def inner(self, other: "JointState", keys=None) -> complex:
        """<self|other>, optionally restricted to a set of branch keys."""
        total = 0j
        for key, terms in self.branches.items():
            if keys is not None and key not in keys:
                continue
            if key in other.branches:
                total += _terms_inner(terms, other.branches[key])
        return total

    def norm2(self) -> float:
        return float(self.inner(self).real)

    def weight(self, key) -> float:
        terms = self.branches.get(key, ())
        return float(_terms_inner(terms, terms).real)

    def amplitude(self, atom, pols) -> complex:
        """Summed amplitude of a key (meaningful when envelopes are unchanged)."""
        return complex(sum(t.amplitude for t in self.branches.get((AtomLabel(atom), tuple(pols)), ())))

    def bookkeeping_error(self) -> float:
        return self.norm2() + self.lost_weight - 1.0

    def scaled(self, factor: complex) -> "JointState":
        return JointState(
            {k: [Term(t.amplitude * factor, t.envelopes) for t in ts] for k, ts in self.branches.items()},
            self.lost_weight,
        )

    def select(self, predicate) -> "JointState":
        return JointState({k: v for k, v in self.branches.items() if predicate(k)}, 0.0)

    def as_vector(self) -> np.ndarray:
        """Amplitudes on the (atom, pols) basis, h/v only, atom as most significant.

        Only valid when every key holds a single term (e.g. ideal mode).
        """
        n = self.n_pulses
        vec = np.zeros(2 ** (n + 1), dtype=complex)
        for (atom, pols), terms in self.branches.items():
            if len(terms) != 1 or "vac" in pols:
                raise InvalidArgumentError("state is not a single-term h/v state")
            idx = int(atom)
            for p in pols:
                idx = 2 * idx + (0 if p == "h" else 1)
            vec[idx] = terms[0].amplitude
        return vec


def product_state(atom: AtomQubit, photons: Sequence[PhotonQubit]) -> JointState:
    branches = {}
    envs = tuple(p.shape for p in photons)
    for a_label, a_amp in ((0, atom.a0), (1, atom.a1)):
        if a_amp == 0:
            continue
        for pols in itertools.product(POLARIZATIONS, repeat=len(photons)):
            amp = a_amp
            for p, ph in zip(pols, photons):
                amp *= ph.amplitudes()[p]
            if amp != 0:
                branches[(a_label, pols)] = [Term(complex(amp), envs)]
    return JointState(branches)


def rotate_atom(state: JointState, theta: float) -> JointState:
    """Apply R(theta): |0> -> cos|0> + sin|1>, |1> -> -sin|0> + cos|1> (half angles)."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    images = {AtomLabel.G0: ((AtomLabel.G0, c), (AtomLabel.G1, s)),
              AtomLabel.G1: ((AtomLabel.G0, -s), (AtomLabel.G1, c))}
    collected: dict = {}
    for (atom, pols), terms in state.branches.items():
        for new_atom, coeff in images[atom]:
            if coeff == 0:
                continue
            collected.setdefault((new_atom, pols), []).extend(
                Term(t.amplitude * coeff, t.envelopes) for t in terms
            )
    return JointState(collected, state.lost_weight)


def flip_polarization(state: JointState, pulse_index: int) -> JointState:
    """Swap h <-> v on one pulse (a half-wave plate)."""
    swap = {"h": "v", "v": "h", "vac": "vac"}
    out = {}
    for (atom, pols), terms in state.branches.items():
        new = list(pols)
        new[pulse_index] = swap[new[pulse_index]]
        out[(atom, tuple(new))] = terms
    return JointState(out, state.lost_weight)


def _reflector(params: CavityParams, solver: str):
    fn = {"time": reflect, "spectral": reflect_spectral}.get(solver)
    if fn is None:
        raise InvalidArgumentError(f"unknown solver {solver!r}")
    cache: dict = {}

    def run(env: Envelope, atom: AtomLabel) -> Envelope:
        key = (id(env), int(atom))
        if key not in cache:
            cache[key] = (env, fn(env, atom, params).out)
        return cache[key][1]

    return run


def cpf_atom_photon(
    state: JointState,
    pulse_index: int,
    params: CavityParams | None = None,
    mode: str = "ideal",
    solver: str = "time",
) -> JointState:
    """Bounce one pulse off the cavity (h) or mirror (v).

    Ideal mode applies exp(i pi |0><0| (x) |h><h|). Simulated mode replaces the
    pulse's envelope in every h branch by the cavity output for that branch's
    atom; the norm that does not come back out (spontaneous emission plus the
    sub-1e-6 residual left in the cavity) is added to ``lost_weight``.
    """
    n = state.n_pulses
    if not 0 <= pulse_index < n:
        raise InvalidArgumentError(f"pulse index {pulse_index} out of range for {n} pulses")
    if mode not in MODES:
        raise InvalidArgumentError(f"mode must be one of {MODES}")
    if mode == "ideal":
        out = {}
        for (atom, pols), terms in state.branches.items():
            sign = -1.0 if atom == AtomLabel.G0 and pols[pulse_index] == "h" else 1.0
            out[(atom, pols)] = [Term(t.amplitude * sign, t.envelopes) for t in terms]
        return JointState(out, state.lost_weight)

    if params is None:
        raise InvalidArgumentError("simulated mode needs cavity parameters")
    run = _reflector(params, solver)
    out = {}
    for (atom, pols), terms in state.branches.items():
        if pols[pulse_index] != "h":
            out[(atom, pols)] = terms
            continue
        new_terms = []
        for t in terms:
            envs = list(t.envelopes)
            envs[pulse_index] = run(envs[pulse_index], atom)
            new_terms.append(Term(t.amplitude, tuple(envs)))
        out[(atom, pols)] = new_terms
    result = JointState(out, state.lost_weight)
    result.lost_weight += state.norm2() - result.norm2()
    return result


@dataclass
class GateReport:
    conditional_fidelity: float
    success_prob: float
    lost_weight: float
    unconditional_fidelity: float
    phase_matrix: dict = field(default_factory=dict)

    @property
    def process_fidelity(self) -> float:
        """Squared conditional fidelity.

        For the uniform-superposition input every computational-basis branch
        carries its own polarization label, so this equals the fidelity of
        the channel's Choi state with the ideal gate's.
        """
        return self.conditional_fidelity**2

    def rows(self):
        rows = [
            ("F", self.conditional_fidelity),
            ("F_unconditional", self.unconditional_fidelity),
            ("success_prob", self.success_prob),
            ("lost_weight", self.lost_weight),
        ]
        for key, phase in self.phase_matrix.items():
            rows.append((f"phase_{key}", phase))
        return rows


def _key_label(key) -> str:
    atom, pols = key
    return f"{int(atom)}{''.join(p if p != 'vac' else '0' for p in pols)}"


def conditional_fidelity(
    actual: JointState, ideal: JointState, reference: JointState | None = None
) -> GateReport:
    """Overlap with the ideal output, conditioned on no photon loss.

    F = |<ideal|actual>| / (|actual| |ideal|). ``phase_matrix`` holds, for each
    branch key of ``reference`` (default: ``ideal``), arg <reference|actual>
    restricted to that key.
    """
    n_act = actual.norm2()
    if n_act <= 0.0:
        raise UndefinedFidelityError("actual state has zero norm (total loss)")
    if actual.n_pulses != ideal.n_pulses:
        raise InvalidArgumentError("pulse count mismatch")
    n_ideal = ideal.norm2()
    ov = abs(ideal.inner(actual))
    ref = ideal if reference is None else reference
    phases = {}
    for key in sorted(ref.branches):
        z = ref.inner(actual, keys={key})
        phases[_key_label(key)] = wrap_phase(math.atan2(z.imag, z.real)) if abs(z) > 1e-14 else float("nan")
    return GateReport(
        conditional_fidelity=ov / math.sqrt(n_act * n_ideal),
        success_prob=1.0 - actual.lost_weight,
        lost_weight=actual.lost_weight,
        unconditional_fidelity=ov / math.sqrt(n_ideal),
        phase_matrix=phases,
    )


def _photon_part(state: JointState, atom: AtomLabel) -> dict:
    return {pols: terms for (a, pols), terms in state.branches.items() if a == atom}


def atom_is_phi_ai(state: JointState, tol: float = 1e-10) -> bool:
    """True if the state factorizes as (photons) (x) (|0> + |1>)/sqrt(2)."""
    p0 = _photon_part(state, AtomLabel.G0)
    p1 = _photon_part(state, AtomLabel.G1)
    diff = {}
    for pols in set(p0) | set(p1):
        diff[(0, pols)] = list(p0.get(pols, ())) + [
            Term(-t.amplitude, t.envelopes) for t in p1.get(pols, ())
        ]
    total = state.norm2()
    return total > 0 and JointState(diff).norm2() <= tol * total


def apply_ideal_cpf_jk(state: JointState, j: int = 0, k: int = 1) -> JointState:
    """exp(i pi |h><h|_j (x) |h><h|_k) with envelopes untouched."""
    out = {}
    for (atom, pols), terms in state.branches.items():
        sign = -1.0 if pols[j] == "h" and pols[k] == "h" else 1.0
        out[(atom, pols)] = [Term(t.amplitude * sign, t.envelopes) for t in terms]
    return JointState(out, state.lost_weight)


def cpf_photon_photon(
    psi: JointState,
    params: CavityParams | None = None,
    mode: str = "ideal",
    pulses: tuple = (0, 1),
    solver: str = "time",
):
    """Photon-photon CPF by bouncing j, rotating, bouncing k, rotating back, bouncing j.

    Returns the output state and a report against U_jk^CPF applied to ``psi``
    with unchanged envelopes. Branch phases in the report are taken relative
    to the input.
    """
    j, k = pulses
    if psi.n_pulses < 2 or j == k:
        raise InvalidArgumentError("need two distinct pulses")
    if not atom_is_phi_ai(psi):
        raise InvalidArgumentError("atom must start in (|0> + |1>)/sqrt(2)")
    s = cpf_atom_photon(psi, j, params, mode, solver)
    s = rotate_atom(s, math.pi / 2)
    s = cpf_atom_photon(s, k, params, mode, solver)
    s = rotate_atom(s, -math.pi / 2)
    s = cpf_atom_photon(s, j, params, mode, solver)
    ideal = apply_ideal_cpf_jk(psi, j, k)
    report = conditional_fidelity(s, ideal, reference=psi)
    return s, report


def atom_photon_gate_report(
    params: CavityParams, shape: Envelope, mode: str = "simulated", solver: str = "time"
):
    """CPF fidelity for the input |Phi_ai> (x) (|h> + |v>)/sqrt(2)."""
    psi = product_state(PHI_AI, [PhotonQubit.diagonal(shape)])
    actual = cpf_atom_photon(psi, 0, params, mode, solver)
    ideal = cpf_atom_photon(psi, 0, mode="ideal")
    return actual, conditional_fidelity(actual, ideal, reference=psi)


def photon_photon_gate_report(
    params: CavityParams, shape: Envelope, mode: str = "simulated", solver: str = "time"
):
    """CPF fidelity for |Phi_ai> (x) D (x) D, D = (|h> + |v>)/sqrt(2)."""
    d = PhotonQubit.diagonal(shape)
    return cpf_photon_photon(product_state(PHI_AI, [d, d]), params, mode, solver=solver)


def gate_phase_table(shape: Envelope, n_photons: int = 2, params=None, mode="ideal", solver="time"):
    """Phase the gate imprints on each polarization basis input.

    For each basis label (e.g. 'hv') this returns arg <in (x) Phi_ai | out>.
    """
    table = {}
    for pols in itertools.product("hv", repeat=n_photons):
        photons = [PhotonQubit.h(shape) if p == "h" else PhotonQubit.v(shape) for p in pols]
        psi = product_state(PHI_AI, photons)
        if n_photons == 1:
            out = cpf_atom_photon(psi, 0, params, mode, solver)
        else:
            out, _ = cpf_photon_photon(psi, params, mode, solver=solver)
        z = psi.inner(out)
        table["".join(pols)] = wrap_phase(math.atan2(z.imag, z.real))
    return table


@dataclass
class QNDResult:
    """Outcome probabilities (unconditional), leaked weight and post-states."""

    probabilities: dict
    lost: float
    post_states: dict

    def rows(self):
        return [(f"P_{k}", v) for k, v in self.probabilities.items()] + [("lost", self.lost)]


def measure_atom(state: JointState):
    """Projective measurement of the atom in {|0>, |1>}.

    Returns ``{0: (prob, post_state), 1: (prob, post_state)}``; post-states
    are normalized, or None for a zero-probability outcome.
    """
    result = {}
    for a in (AtomLabel.G0, AtomLabel.G1):
        sub = state.select(lambda key, a=a: key[0] == a)
        p = max(sub.norm2(), 0.0)
        result[int(a)] = (p, sub.scaled(1 / math.sqrt(p)) if p > 0 else None)
    return result


def _finish(state: JointState, labels: Mapping[int, object]) -> QNDResult:
    state = rotate_atom(state, math.pi / 2)
    m = measure_atom(state)
    probs = {labels[a]: m[a][0] for a in (0, 1)}
    posts = {labels[a]: m[a][1] for a in (0, 1)}
    return QNDResult(probs, state.lost_weight, posts)


def qnd_photon_number(pulse: PhotonQubit, params=None, mode="ideal", solver="time") -> QNDResult:
    """Outcome '0' iff the h component holds a photon."""
    s = product_state(PHI_AI, [pulse])
    s = cpf_atom_photon(s, 0, params, mode, solver)
    return _finish(s, {0: "0", 1: "1"})


def qnd_parity(pulses: Sequence[PhotonQubit], params=None, mode="ideal", solver="time") -> QNDResult:
    """Parity of the total h-photon number over several pulses."""
    if not pulses:
        raise InvalidArgumentError("need at least one pulse")
    s = product_state(PHI_AI, list(pulses))
    for i in range(len(pulses)):
        s = cpf_atom_photon(s, i, params, mode, solver)
    return _finish(s, {0: "odd", 1: "even"})


def qnd_total_number(pulse: PhotonQubit, params=None, mode="ideal", solver="time") -> QNDResult:
    """Photon number in h and v together: bounce, flip, bounce, flip back.

    The final flip restores the input polarization so the measurement leaves
    the photon as it was. Outcomes are keyed by photon number (0 or 1).
    """
    s = product_state(PHI_AI, [pulse])
    s = cpf_atom_photon(s, 0, params, mode, solver)
    s = flip_polarization(s, 0)
    s = cpf_atom_photon(s, 0, params, mode, solver)
    s = flip_polarization(s, 0)
    return _finish(s, {0: 1, 1: 0})

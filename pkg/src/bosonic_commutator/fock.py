"""Truncated Fock-space states and ladder-operator algebra.

States of the experiment are phase averaged, so the working representation is
the photon-number distribution (:class:`DiagonalState`).  Operators are plain
complex ``numpy`` arrays of shape ``(n_max + 1, n_max + 1)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy.linalg import sqrtm
from scipy.special import comb
from scipy.stats import binom

PROB_TOL = 1e-12
TRACE_TOL = 1e-10
HERALD_TOL = 1e-14


class HeraldingError(ValueError):
    """Raised when a conditional operation has (numerically) zero success probability."""


class TruncationError(ValueError):
    """Raised when the truncated Fock space cannot hold a state to the requested accuracy."""


@dataclass(frozen=True, eq=False)
class DiagonalState:
    """Photon-number distribution ``probs[n]`` on ``|0>..|n_max>``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("probs must be a 1-D vector of length n_max + 1 >= 2")
        if not np.all(np.isfinite(p)):
            raise ValueError("probs must be finite")
        if p.min() < -PROB_TOL:
            raise ValueError(f"negative probability {p.min():.3e}")
        if abs(p.sum() - 1.0) > TRACE_TOL:
            raise ValueError(f"probabilities sum to {p.sum():.12f}, not 1")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    @property
    def dim(self) -> int:
        return self.probs.size

    @classmethod
    def from_weights(cls, weights) -> "DiagonalState":
        """Normalize non-negative weights into a state."""
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        total = w.sum()
        if not total > 0:
            raise ValueError("weights have zero total mass")
        return cls(w / total)

    @classmethod
    def fock(cls, n: int, n_max: int) -> "DiagonalState":
        p = np.zeros(n_max + 1)
        p[n] = 1.0
        return cls(p)

    @classmethod
    def vacuum(cls, n_max: int) -> "DiagonalState":
        return cls.fock(0, n_max)

    def to_density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.diag(self.probs).astype(complex))

    def __repr__(self):
        return f"DiagonalState(n_max={self.n_max}, mean_n={mean_photon(self):.6g})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """General single-mode density matrix on the truncated space."""

    elements: np.ndarray

    def __post_init__(self):
        rho = np.array(self.elements, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("density matrix must be square")
        if np.max(np.abs(rho - rho.conj().T)) > PROB_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > TRACE_TOL:
            raise ValueError("density matrix trace is not 1")
        if np.linalg.eigvalsh(rho).min() < -TRACE_TOL:
            raise ValueError("density matrix is not positive semidefinite")
        rho.setflags(write=False)
        object.__setattr__(self, "elements", rho)

    @property
    def n_max(self) -> int:
        return self.elements.shape[0] - 1

    def diagonal(self) -> DiagonalState:
        return DiagonalState(np.real(np.diag(self.elements)))


@dataclass(frozen=True)
class SuperpositionSpec:
    """Heralded superposition ``a a^dag - e^{i phi} a^dag a``.

    ``K`` is the hypothesised commutator constant and ``v`` the coherence between
    the two herald paths (1: coherent superposition, 0: equal-weight mixture).
    """

    phi: float
    K: float = 1.0
    v: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.phi < 2 * np.pi:
            object.__setattr__(self, "phi", float(np.mod(self.phi, 2 * np.pi)))
        if self.K < 0:
            raise ValueError("K must be >= 0")
        if not 0.0 <= self.v <= 1.0:
            raise ValueError("v must lie in [0, 1]")


@dataclass(frozen=True)
class SubtractionModel:
    """Photon subtraction stage: ideal ``a`` or a beam splitter of reflectivity ``r``."""

    reflectivity: float | None = None

    def __post_init__(self):
        r = self.reflectivity
        if r is not None and not 0.0 < r < 1.0:
            raise ValueError("beam-splitter reflectivity must lie in (0, 1)")

    @property
    def ideal(self) -> bool:
        return self.reflectivity is None

    @classmethod
    def parse(cls, text: str) -> "SubtractionModel":
        text = text.strip()
        if text == "ideal":
            return cls()
        m = re.fullmatch(r"beamsplitter\(\s*([0-9.eE+-]+)\s*\)", text)
        if m is None:
            raise ValueError(f"unknown subtraction model {text!r}; use 'ideal' or 'beamsplitter(r)'")
        return cls(float(m.group(1)))

    def __str__(self):
        return "ideal" if self.ideal else f"beamsplitter({self.reflectivity!r})"


# --- operators -------------------------------------------------------------


def ladder_matrices(n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(a, a_dag)`` truncated to ``|0>..|n_max>``."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    a = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)
    return a, a.conj().T


def number_operator(n_max: int) -> np.ndarray:
    return np.diag(np.arange(n_max + 1, dtype=float)).astype(complex)


def superposition_operator(spec: SuperpositionSpec, n_max: int) -> np.ndarray:
    """Diagonal operator ``(1 - e^{i phi}) n + K``.

    Uses ``a a^dag = a^dag a + K`` so that the truncation does not spoil the
    top Fock level.
    """
    n = np.arange(n_max + 1, dtype=float)
    return np.diag((1.0 - np.exp(1j * spec.phi)) * n + spec.K)


def polynomial_operator(terms, n_max: int) -> np.ndarray:
    """Sum of ``amplitude * (a^dag)**p_create @ a**p_annihilate`` over ``terms``.

    ``terms`` is an iterable of ``(p_create, p_annihilate, amplitude)``.
    """
    a, ad = ladder_matrices(n_max)
    out = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    for p_create, p_annihilate, amplitude in terms:
        if p_create < 0 or p_annihilate < 0:
            raise ValueError("operator powers must be non-negative")
        if p_create > n_max or p_annihilate > n_max:
            raise ValueError("operator powers must not exceed n_max")
        term = np.linalg.matrix_power(ad, p_create) @ np.linalg.matrix_power(a, p_annihilate)
        out += complex(amplitude) * term
    return out


# --- states ----------------------------------------------------------------


def thermal_tail(mean_n: float, n_max: int) -> float:
    """Bose-Einstein probability mass above ``n_max``."""
    if mean_n == 0:
        return 0.0
    return float((mean_n / (1.0 + mean_n)) ** (n_max + 1))


def thermal_state(mean_n: float, n_max: int, tail_tol: float = 1e-6) -> DiagonalState:
    """Bose-Einstein distribution of mean ``mean_n``, renormalized on the truncated space.

    Raises :class:`TruncationError` when more than ``tail_tol`` of the
    untruncated distribution lies above ``n_max``.
    """
    if mean_n < 0:
        raise ValueError("mean_n must be >= 0")
    tail = thermal_tail(mean_n, n_max)
    if tail > tail_tol:
        raise TruncationError(
            f"thermal tail {tail:.3e} above n_max={n_max} exceeds {tail_tol:.1e}; increase n_max"
        )
    n = np.arange(n_max + 1)
    if mean_n == 0:
        return DiagonalState.vacuum(n_max)
    # geometric weights with ratio mean_n / (1 + mean_n)
    logw = n * np.log(mean_n) - (n + 1) * np.log1p(mean_n)
    return DiagonalState.from_weights(np.exp(logw))


def mean_photon(state: DiagonalState) -> float:
    return float(np.dot(np.arange(state.dim), state.probs))


def trace_distance(a: DiagonalState, b: DiagonalState) -> float:
    return 0.5 * float(np.abs(a.probs - b.probs).sum())


def fidelity(a: DiagonalState, b: DiagonalState) -> float:
    """Uhlmann fidelity of two commuting (diagonal) states, ``(sum sqrt(a_n b_n))**2``."""
    if a.dim != b.dim:
        raise ValueError("states live in different truncations")
    f = float(np.sum(np.sqrt(a.probs * b.probs)) ** 2)
    return min(f, 1.0)


def fidelity_dm(a: DensityMatrix, b: DensityMatrix) -> float:
    """General fidelity ``|Tr sqrt(sqrt(a) b sqrt(a))|**2``."""
    sa = sqrtm(a.elements)
    inner = sqrtm(sa @ b.elements @ sa)
    return min(float(abs(np.trace(inner)) ** 2), 1.0)


# --- conditional operations ------------------------------------------------


def apply_conditional(op: np.ndarray, state: DiagonalState) -> tuple[DiagonalState, float]:
    """Herald ``op`` on a diagonal state: ``rho -> op rho op^dag / Tr``.

    Returns the normalized output and the success weight ``Tr[op rho op^dag]``.
    ``op`` must map diagonal states to diagonal states (any function of n, or a
    single power of a ladder operator); use :func:`apply_conditional_dm` otherwise.
    """
    op = np.asarray(op, dtype=complex)
    if op.shape != (state.dim, state.dim):
        raise ValueError("operator and state dimensions differ")
    rho = (op * state.probs) @ op.conj().T
    diag = np.real(np.diag(rho))
    weight = float(diag.sum())
    if weight < HERALD_TOL:
        raise HeraldingError("operator annihilates the state; heralding probability is zero")
    off = rho - np.diag(np.diag(rho))
    if np.max(np.abs(off)) > 1e-12 * max(weight, 1.0):
        raise ValueError("operator does not preserve diagonal states; use apply_conditional_dm")
    return DiagonalState(diag / weight), weight


def apply_conditional_dm(op: np.ndarray, rho: DensityMatrix) -> tuple[DensityMatrix, float]:
    op = np.asarray(op, dtype=complex)
    out = op @ rho.elements @ op.conj().T
    weight = float(np.trace(out).real)
    if weight < HERALD_TOL:
        raise HeraldingError("operator annihilates the state; heralding probability is zero")
    out = out / weight
    return DensityMatrix(0.5 * (out + out.conj().T)), weight


def branch_amplitudes(
    spec: SuperpositionSpec, n_max: int, subtraction: SubtractionModel | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal amplitudes of the two heralded sequences, ``a a^dag`` and ``a^dag a``.

    With the ideal subtraction these are ``n + K`` and ``n``.  A beam splitter of
    reflectivity r replaces each ``a`` by the single-reflection Kraus operator;
    the common factor ``sqrt(r)`` is dropped since heralding renormalizes.
    """
    n = np.arange(n_max + 1, dtype=float)
    first = n + spec.K
    second = n.copy()
    if subtraction is not None and not subtraction.ideal:
        t2 = 1.0 - subtraction.reflectivity
        # no reflection of n photons at the first splitter, one of n + 1 at the second
        first = first * t2**n
        # one of n reflected at the first splitter, none of n at the second
        second = second * t2 ** np.maximum(n - 0.5, 0.0)
    return first, second


def apply_partially_coherent(
    spec: SuperpositionSpec,
    state: DiagonalState,
    subtraction: SubtractionModel | None = None,
) -> tuple[DiagonalState, float]:
    """Heralded superposition with herald-path coherence ``spec.v``.

    Output is the normalization of
    ``A rho A^dag + B rho B^dag - v (e^{-i phi} A rho B^dag + e^{i phi} B rho A^dag)``
    with ``A``, ``B`` the two branch operators.  At ``v = 1`` this equals heralding
    the superposition operator; at ``v = 0`` the phase drops out.
    """
    first, second = branch_amplitudes(spec, state.n_max, subtraction)
    gain = first**2 + second**2 - 2.0 * spec.v * np.cos(spec.phi) * first * second
    w = state.probs * np.clip(gain, 0.0, None)
    weight = float(w.sum())
    if weight < HERALD_TOL:
        raise HeraldingError("operator annihilates the state; heralding probability is zero")
    return DiagonalState(w / weight), weight


def loss_matrix(n_max: int, eta: float) -> np.ndarray:
    """Bernoulli loss map ``L[m, n] = C(n, m) eta^m (1 - eta)^(n - m)``."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    n = np.arange(n_max + 1)
    return binom.pmf(n[:, None], n[None, :], eta)


def loss_channel(state: DiagonalState, eta: float) -> DiagonalState:
    out = loss_matrix(state.n_max, eta) @ state.probs
    return DiagonalState(out / out.sum())


def bs_subtraction(state: DiagonalState, reflectivity: float) -> tuple[DiagonalState, float]:
    """Photon subtraction by a beam splitter with an on/off herald detector.

    The reflected mode starts in vacuum; conditioning is on at least one
    reflected photon.  Returns the kept-mode state and the click probability.
    """
    if not 0.0 < reflectivity < 1.0:
        raise ValueError("reflectivity must lie in (0, 1)")
    dim = state.dim
    m = np.arange(dim)[:, None]  # photons kept
    k = np.arange(dim)[None, :]  # photons reflected
    total = m + k
    src = np.where(total < dim, total, 0)
    joint = comb(total, k) * (1.0 - reflectivity) ** m * reflectivity**k * state.probs[src]
    joint = np.where(total < dim, joint, 0.0)
    clicked = joint[:, 1:].sum(axis=1)
    click_prob = float(clicked.sum())
    if click_prob < HERALD_TOL:
        raise HeraldingError("no herald click is possible for this input")
    return DiagonalState(clicked / click_prob), click_prob


def click_probability(state: DiagonalState, reflectivity: float) -> float:
    n = np.arange(state.dim)
    return float(np.dot(state.probs, 1.0 - (1.0 - reflectivity) ** n))

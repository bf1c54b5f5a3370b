"""Diagonal maximum-likelihood tomography and Wigner functions.

The photon-number distribution is reconstructed from a phase-averaged
quadrature histogram by expectation-maximization.  Detector efficiency can be
folded into the measurement operators (:func:`build_povm`) or removed from a
reconstructed distribution afterwards (:func:`inverse_loss`).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .fock import DiagonalState, loss_matrix
from .quadrature import QuadratureHistogram, bin_integrals

log = logging.getLogger(__name__)


class ReconstructionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BinnedPovm:
    """Bin probabilities for each Fock level, efficiency included.

    ``elements[j, n]`` is the probability that level ``n`` lands in bin ``j``;
    ``outside[n]`` is the mass falling outside the binned range.
    """

    edges: np.ndarray
    elements: np.ndarray
    outside: np.ndarray
    eta_d: float

    @property
    def n_max(self) -> int:
        return self.elements.shape[1] - 1


def build_povm(edges, n_max: int, eta_d: float = 1.0) -> BinnedPovm:
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing")
    if not 0.0 < eta_d <= 1.0:
        raise ValueError("eta_d must lie in (0, 1]")
    ideal = bin_integrals(edges, n_max)
    elements = ideal @ loss_matrix(n_max, eta_d)
    elements = np.clip(elements, 0.0, None)
    outside = np.clip(1.0 - elements.sum(axis=0), 0.0, None)
    return BinnedPovm(edges, elements, outside, float(eta_d))


@dataclass(eq=False)
class ReconstructionResult:
    state: DiagonalState
    log_likelihood_trace: np.ndarray
    iterations: int
    converged: bool
    config: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "probs": [float(p) for p in self.state.probs],
            "log_likelihood_trace": [float(v) for v in self.log_likelihood_trace],
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "config": self.config,
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)


def _log_likelihood(counts, q):
    used = counts > 0
    return float(np.dot(counts[used], np.log(q[used])))


def mle_reconstruct(
    hist: QuadratureHistogram,
    povm: BinnedPovm,
    max_iter: int = 5000,
    tol: float = 1e-9,
    initial: DiagonalState | None = None,
) -> ReconstructionResult:
    """Expectation-maximization estimate of the photon-number distribution.

    The overflow count of ``hist`` is matched against the POVM's out-of-range
    mass, so the likelihood covers every recorded sample.
    """
    if not np.allclose(hist.bin_edges, povm.edges, rtol=0, atol=1e-12):
        raise ValueError("histogram and POVM use different bin edges")
    counts = np.append(np.asarray(hist.counts, dtype=float), float(hist.overflow))
    n_samples = counts.sum()
    if hist.total <= 0 or n_samples <= 0:
        raise ReconstructionError("histogram is empty")
    E = np.vstack([povm.elements, povm.outside[None, :]])

    # bins nobody can reach carry no information; data there means model mismatch
    reachable = E.max(axis=1) > 1e-15
    if np.any(counts[~reachable] > 0):
        raise ReconstructionError("data fall in bins with zero probability for every Fock level")
    E = E[reachable]
    f = counts[reachable] / n_samples
    c = counts[reachable]

    dim = povm.n_max + 1
    p = np.full(dim, 1.0 / dim) if initial is None else np.array(initial.probs, dtype=float)
    if p.size != dim:
        raise ValueError("initial state has the wrong dimension")

    q = E @ p
    trace = [_log_likelihood(c, q)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        ratio = np.divide(f, q, out=np.zeros_like(f), where=f > 0)
        p_new = p * (ratio @ E)
        p_new /= p_new.sum()
        step = np.max(np.abs(p_new - p))
        p = p_new
        q = E @ p
        trace.append(_log_likelihood(c, q))
        if step < tol:
            converged = True
            break
    if not converged:
        log.warning("EM stopped after %d iterations without reaching tol=%g", it, tol)
    return ReconstructionResult(
        state=DiagonalState(p / p.sum()),
        log_likelihood_trace=np.asarray(trace),
        iterations=it,
        converged=converged,
        config={"max_iter": max_iter, "tol": tol, "eta_d": povm.eta_d, "n_max": povm.n_max},
    )


def inverse_loss(state: DiagonalState, eta: float, max_clip: float = 0.05) -> tuple[DiagonalState, float]:
    """Undo a Bernoulli loss of efficiency ``eta`` (> 0.5).

    Negative entries produced by noise are clipped; returns the corrected state
    and the clipped mass.  Raises if more than ``max_clip`` had to be clipped.
    """
    if not 0.5 < eta <= 1.0:
        raise ValueError("inverse loss is only supported for 0.5 < eta <= 1")
    if eta == 1.0:
        return state, 0.0
    L = loss_matrix(state.n_max, eta)
    raw = solve_triangular(L, state.probs, lower=False)
    clipped = float(-raw[raw < 0].sum())
    if clipped > max_clip:
        raise ReconstructionError(f"loss inversion clipped mass {clipped:.3f} > {max_clip}")
    return DiagonalState.from_weights(np.clip(raw, 0.0, None)), clipped


@dataclass(frozen=True, eq=False)
class WignerGrid:
    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray  # values[i, j] = W(x_axis[i], p_axis[j])

    def integral(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.values, self.p_axis, axis=1), self.x_axis))

    def value_at_origin(self) -> float:
        i = int(np.argmin(np.abs(self.x_axis)))
        j = int(np.argmin(np.abs(self.p_axis)))
        return float(self.values[i, j])

    def write_csv(self, path) -> None:
        """Matrix CSV: first row holds the p axis, first column the x axis."""
        with open(path, "w") as fh:
            fh.write("x\\p," + ",".join(repr(float(p)) for p in self.p_axis) + "\n")
            for x, row in zip(self.x_axis, self.values):
                fh.write(repr(float(x)) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def wigner_radial(state: DiagonalState, r2) -> np.ndarray:
    """``W`` as a function of ``r2 = x**2 + p**2``.

    ``W = (1/pi) sum_n p_n (-1)^n exp(-r2) L_n(2 r2)``; the recurrence runs on
    ``exp(-r2) L_n(2 r2)`` directly so nothing overflows.
    """
    y = 2.0 * np.asarray(r2, dtype=float)
    prev = np.exp(-0.5 * y)
    total = state.probs[0] * prev
    if state.n_max >= 1:
        cur = (1.0 - y) * prev
        total = total - state.probs[1] * cur
        for n in range(1, state.n_max):
            prev, cur = cur, ((2 * n + 1 - y) * cur - n * prev) / (n + 1)
            total = total + (-1) ** (n + 1) * state.probs[n + 1] * cur
    return total / np.pi


def wigner_diagonal(state: DiagonalState, x_axis, p_axis=None) -> WignerGrid:
    x_axis = np.asarray(x_axis, dtype=float)
    p_axis = x_axis if p_axis is None else np.asarray(p_axis, dtype=float)
    r2 = x_axis[:, None] ** 2 + p_axis[None, :] ** 2
    return WignerGrid(x_axis, p_axis, wigner_radial(state, r2))


def wigner_origin(state: DiagonalState) -> float:
    """``W(0, 0) = (1/pi) sum_n (-1)^n p_n``."""
    signs = (-1.0) ** np.arange(state.dim)
    return float(np.dot(signs, state.probs) / np.pi)

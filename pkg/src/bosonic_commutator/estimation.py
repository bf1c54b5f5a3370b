"""Maximum-likelihood estimate of the commutator constant K from homodyne samples.

For fixed thermal occupation, efficiency, phase and coherence, every heralded
level weight is a quadratic polynomial in K, so the per-sample likelihood is
``(A_i + B_i K + C_i K^2) / Z(K)``.  The three per-sample coefficients are
computed once and the K scan costs one vectorized pass per point.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .fock import (
    DiagonalState,
    SubtractionModel,
    SuperpositionSpec,
    apply_partially_coherent,
    branch_amplitudes,
    loss_channel,
    loss_matrix,
    thermal_state,
)
from .quadrature import eigenfunction_table, quadrature_pdf

DEFAULT_N_MAX = 30


class FitError(ValueError):
    pass


def fringe_rate(phi: float, visibility: float) -> float:
    """Normalized single-photon interference rate, ``(1 + V cos phi) / 2``."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    return 0.5 * (1.0 + visibility * math.cos(phi))


def model_state(
    K: float,
    mean_n: float,
    eta: float,
    phi: float = math.pi,
    v: float = 1.0,
    n_max: int = DEFAULT_N_MAX,
    subtraction: SubtractionModel | None = None,
) -> DiagonalState:
    """thermal -> heralded superposition -> loss."""
    state, _ = apply_partially_coherent(SuperpositionSpec(phi, K, v), thermal_state(mean_n, n_max), subtraction)
    return loss_channel(state, eta)


def model_pdf(K: float, mean_n: float, eta: float, x, phi: float = math.pi, v: float = 1.0,
              n_max: int = DEFAULT_N_MAX, subtraction: SubtractionModel | None = None):
    return quadrature_pdf(model_state(K, mean_n, eta, phi, v, n_max, subtraction), x)


@dataclass(frozen=True, eq=False)
class ModelCurve:
    K: float
    eta: float
    mean_n: float
    x: np.ndarray
    pdf: np.ndarray

    @classmethod
    def compute(cls, K, mean_n, eta, x, **kwargs) -> "ModelCurve":
        x = np.asarray(x, dtype=float)
        return cls(float(K), float(eta), float(mean_n), x, model_pdf(K, mean_n, eta, x, **kwargs))


def gain_coefficients(phi, v, n_max, subtraction=None):
    """Per-level ``(c0, c1, c2)`` with heralded gain ``c0 + c1 K + c2 K^2``."""
    f0, b = branch_amplitudes(SuperpositionSpec(phi, 0.0, v), n_max, subtraction)
    f1, _ = branch_amplitudes(SuperpositionSpec(phi, 1.0, v), n_max, subtraction)
    d = f1 - f0
    c = 2.0 * v * math.cos(phi)
    return f0**2 + b**2 - c * f0 * b, 2.0 * f0 * d - c * d * b, d**2


class KLikelihood:
    """Unbinned log-likelihood of quadrature samples as a function of K."""

    def __init__(self, samples, mean_n, eta, phi=math.pi, v=1.0, n_max=DEFAULT_N_MAX, subtraction=None):
        samples = np.asarray(samples, dtype=float).ravel()
        p = thermal_state(mean_n, n_max).probs
        coeffs = [p * c for c in gain_coefficients(phi, v, n_max, subtraction)]
        psi = eigenfunction_table(n_max, samples)
        # G[i, n]: density at sample i of a lossy Fock level n
        G = (psi * psi) @ loss_matrix(n_max, eta)
        self.abc = np.stack([G @ c for c in coeffs])
        self.z = np.array([c.sum() for c in coeffs])
        self.n = samples.size

    def __call__(self, K: float, weights=None) -> float:
        num = self.abc[0] + K * self.abc[1] + K * K * self.abc[2]
        z = self.z[0] + K * self.z[1] + K * K * self.z[2]
        if weights is None:
            return float(np.sum(np.log(num)) - self.n * math.log(z))
        return float(np.dot(weights, np.log(num)) - weights.sum() * math.log(z))


@dataclass(eq=False)
class KFitResult:
    k_hat: float
    sigma_k: float
    log_likelihood_profile: np.ndarray  # rows of (K, logL)
    method: str = "curvature"
    sigma_curvature: float | None = None
    bootstrap_k: np.ndarray | None = None
    n_samples: int = 0
    meta: dict = field(default_factory=dict)

    def formatted(self) -> str:
        return "K = " + format_uncertainty(self.k_hat, self.sigma_k)

    def to_json_dict(self) -> dict:
        out = {
            "k_hat": self.k_hat,
            "sigma_k": self.sigma_k,
            "method": self.method,
            "sigma_curvature": self.sigma_curvature,
            "formatted": self.formatted(),
            "n_samples": self.n_samples,
            "log_likelihood_profile": [[float(k), float(ll)] for k, ll in self.log_likelihood_profile],
        }
        if self.bootstrap_k is not None:
            out["bootstrap_k"] = [float(k) for k in self.bootstrap_k]
        out.update(self.meta)
        return out

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)


def format_uncertainty(value: float, sigma: float) -> str:
    """Parenthesized one-digit uncertainty, e.g. ``1.02(3)``."""
    if not sigma > 0 or not math.isfinite(sigma):
        return f"{value:g}"
    decimals = max(0, -int(math.floor(math.log10(sigma))))
    digit = round(sigma * 10**decimals)
    if digit >= 10:  # 0.096 rounds to 0.1
        decimals = max(0, decimals - 1)
        digit = round(sigma * 10**decimals)
    return f"{value:.{decimals}f}({digit})"


def _curvature(ll, k, h):
    return (ll(k + h) - 2.0 * ll(k) + ll(k - h)) / (h * h)


def fit_k(
    samples,
    mean_n: float,
    eta: float,
    k_range: tuple[float, float] = (0.1, 5.0),
    *,
    phi: float = math.pi,
    v: float = 1.0,
    n_max: int = DEFAULT_N_MAX,
    subtraction: SubtractionModel | None = None,
    grid_step: float = 0.05,
    fd_step: float = 1e-3,
    bootstrap: int = 0,
    seed: int = 0,
) -> KFitResult:
    """Fit K by a coarse likelihood scan refined with golden-section search.

    The 1-sigma error comes from the observed curvature of the log-likelihood;
    with ``bootstrap > 0`` it is replaced by the spread of that many resampled fits.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 1000:
        raise FitError("need at least 1000 samples to fit K")
    lo, hi = k_range
    if not 0.0 <= lo < hi:
        raise ValueError("k_range must satisfy 0 <= lo < hi")

    ll = KLikelihood(samples, mean_n, eta, phi, v, n_max, subtraction)
    ks = np.arange(lo, hi + 0.5 * grid_step, grid_step)
    ks = ks[ks <= hi + 1e-12]
    profile = np.array([ll(k) for k in ks])
    if np.ptp(profile) <= 1e-9 * (1.0 + abs(profile.max())):
        raise FitError("log-likelihood is flat in K: curvature is non-negative, K is not identifiable")
    i = int(np.argmax(profile))
    if i == 0 or i == ks.size - 1:
        raise FitError(f"likelihood maximum lies on the k_range boundary (K={ks[i]:g})")
    peaks = np.sum((profile[1:-1] > profile[:-2]) & (profile[1:-1] > profile[2:]))
    if peaks > 1:
        warnings.warn("log-likelihood profile is not unimodal over k_range", RuntimeWarning)

    res = minimize_scalar(lambda k: -ll(k), bracket=(ks[i - 1], ks[i], ks[i + 1]), method="golden",
                          options={"xtol": 1e-10})
    k_hat = float(res.x)
    d2 = _curvature(ll, k_hat, fd_step)
    if not d2 < 0:
        raise FitError("log-likelihood curvature at the maximum is non-negative")
    sigma_curv = 1.0 / math.sqrt(-d2)

    result = KFitResult(
        k_hat=k_hat,
        sigma_k=sigma_curv,
        log_likelihood_profile=np.column_stack([ks, profile]),
        sigma_curvature=sigma_curv,
        n_samples=int(samples.size),
        meta={"mean_n": mean_n, "eta": eta, "phi": phi, "v": v, "k_range": [lo, hi]},
    )
    if bootstrap > 0:
        rng = np.random.default_rng(seed)
        width = 10.0 * sigma_curv
        boots = np.empty(bootstrap)
        for b in range(bootstrap):
            w = rng.multinomial(samples.size, np.full(samples.size, 1.0 / samples.size)).astype(float)
            r = minimize_scalar(lambda k: -ll(k, w), bounds=(max(lo, k_hat - width), k_hat + width),
                                method="bounded", options={"xatol": 1e-7})
            boots[b] = r.x
        result.bootstrap_k = boots
        result.sigma_k = float(np.std(boots, ddof=1))
        result.method = "bootstrap"
    return result

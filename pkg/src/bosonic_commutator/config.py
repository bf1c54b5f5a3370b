"""Experiment configuration (JSON), validated fail-closed."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

from .fock import SubtractionModel


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists one message per offending field."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _default_phis():
    return tuple(k * math.pi / 8 for k in range(9))


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one simulated run.

    Units: ``mean_n`` photons; ``phi_list`` radians; ``K`` dimensionless
    commutator constant; ``v`` herald coherence in [0, 1]; ``eta_total`` and
    ``eta_d`` efficiencies in (0, 1]; ``n_max`` highest Fock level kept;
    ``samples_per_phase`` homodyne samples per phase point; ``x_range`` in
    quadrature units with vacuum variance 1/2.  ``subtraction_model`` is
    ``"ideal"`` or ``"beamsplitter(r)"`` with intensity reflectivity r.
    """

    mean_n: float = 0.9
    phi_list: tuple = field(default_factory=_default_phis)
    K: float = 1.0
    v: float = 0.97
    eta_total: float = 0.61
    eta_d: float = 0.7
    n_max: int = 30
    samples_per_phase: int = 25000
    seed: int = 0
    bins: int = 100
    x_range: tuple = (-5.0, 5.0)
    subtraction_model: str = "ideal"

    def __post_init__(self):
        object.__setattr__(self, "phi_list", tuple(float(p) for p in self.phi_list))
        object.__setattr__(self, "x_range", tuple(float(x) for x in self.x_range))
        self.validate()

    @property
    def eta_prep(self) -> float:
        return self.eta_total / self.eta_d

    @property
    def subtraction(self) -> SubtractionModel:
        return SubtractionModel.parse(self.subtraction_model)

    def validate(self) -> None:
        errs = []

        def check(ok, name, msg):
            if not ok:
                errs.append(f"{name}: {msg}")

        check(math.isfinite(self.mean_n) and self.mean_n >= 0, "mean_n", "must be a finite number >= 0")
        check(len(self.phi_list) >= 1, "phi_list", "must contain at least one phase")
        check(all(0.0 <= p <= 2 * math.pi for p in self.phi_list), "phi_list", "phases must lie in [0, 2*pi]")
        check(math.isfinite(self.K) and self.K >= 0, "K", "must be >= 0")
        check(0.0 <= self.v <= 1.0, "v", "must lie in [0, 1]")
        check(0.0 < self.eta_total <= 1.0, "eta_total", "must lie in (0, 1]")
        check(0.0 < self.eta_d <= 1.0, "eta_d", "must lie in (0, 1]")
        if 0.0 < self.eta_total <= 1.0 and 0.0 < self.eta_d <= 1.0:
            check(self.eta_prep <= 1.0 + 1e-12, "eta_d",
                  f"must be >= eta_total so that eta_prep = eta_total/eta_d lies in (0, 1] (got {self.eta_prep:.4g})")
        check(isinstance(self.n_max, int) and self.n_max >= 1, "n_max", "must be an integer >= 1")
        check(isinstance(self.samples_per_phase, int) and self.samples_per_phase >= 1,
              "samples_per_phase", "must be an integer >= 1")
        check(isinstance(self.seed, int) and 0 <= self.seed < 2**64, "seed", "must be an integer in [0, 2**64)")
        check(isinstance(self.bins, int) and self.bins >= 1, "bins", "must be an integer >= 1")
        check(len(self.x_range) == 2 and self.x_range[0] < self.x_range[1], "x_range", "must be [lo, hi] with lo < hi")
        try:
            SubtractionModel.parse(self.subtraction_model)
        except (ValueError, AttributeError) as exc:
            errs.append(f"subtraction_model: {exc}")
        if errs:
            raise ConfigError(errs)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["phi_list"] = list(self.phi_list)
        d["x_range"] = list(self.x_range)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError(["config: top level must be a JSON object"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([f"{k}: unknown field" for k in unknown])
        kwargs = dict(data)
        errs = []
        for name in ("n_max", "samples_per_phase", "seed", "bins"):
            if name in kwargs and (isinstance(kwargs[name], bool) or not isinstance(kwargs[name], int)):
                errs.append(f"{name}: must be an integer")
        for name in ("mean_n", "K", "v", "eta_total", "eta_d"):
            if name in kwargs and (isinstance(kwargs[name], bool) or not isinstance(kwargs[name], (int, float))):
                errs.append(f"{name}: must be a number")
        for name in ("phi_list", "x_range"):
            if name in kwargs and not isinstance(kwargs[name], (list, tuple)):
                errs.append(f"{name}: must be a list")
        if "subtraction_model" in kwargs and not isinstance(kwargs["subtraction_model"], str):
            errs.append("subtraction_model: must be a string")
        if errs:
            raise ConfigError(errs)
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError([str(exc)]) from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config: invalid JSON ({exc})"]) from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(fh.read())

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

"""Scenario, the three strategy kinds, and the shared wealth step.

At each rebalance date t = 0..T-1 the contribution is injected, the account
is rebalanced to equity fraction p, and one period of returns accrues.
W_T is read after the last period with no injection at T.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Union

import numpy as np

if TYPE_CHECKING:
    from .adaptive import PolicyGrid


@dataclass(frozen=True)
class Scenario:
    T: int = 30
    W0: float = 10_000.0
    c: float = 10_000.0
    rebalance_interval: float = 1.0
    contribution_times: Optional[tuple] = None  # default: every date 0..T-1

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("horizon must be positive")
        if self.W0 < 0 or self.c < 0:
            raise ValueError("initial wealth and contribution must be nonnegative")
        if self.rebalance_interval != 1.0:
            raise ValueError("only annual rebalancing is supported")
        times = tuple(range(self.T)) if self.contribution_times is None else tuple(sorted(int(t) for t in self.contribution_times))
        if any(t < 0 or t >= self.T for t in times):
            raise ValueError("contribution times must lie in [0, T)")
        object.__setattr__(self, "contribution_times", times)

    @property
    def dt(self) -> float:
        return self.rebalance_interval

    @property
    def contributions(self) -> np.ndarray:
        """Contribution at each rebalance date, length T."""
        out = np.zeros(self.T)
        out[list(self.contribution_times)] = self.c
        return out

    def bond_terminal_wealth(self, bond_gross: float) -> float:
        """Terminal wealth with everything in the deterministic bond."""
        w = self.W0
        for ct in self.contributions:
            w = (w + ct) * bond_gross
        return w

    def to_dict(self) -> dict:
        d = {"T": self.T, "W0": self.W0, "c": self.c}
        if self.contribution_times != tuple(range(self.T)):
            d["contribution_times"] = list(self.contribution_times)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        ct = d.get("contribution_times")
        return cls(T=int(d.get("T", 30)), W0=float(d.get("W0", 10_000.0)), c=float(d.get("c", 10_000.0)),
                   contribution_times=tuple(ct) if ct is not None else None)


def age_based_fraction(age: float) -> float:
    """The (110 - age)/100 rule, clamped to [0, 1]."""
    if age < 0:
        raise ValueError("age must be nonnegative")
    return min(1.0, max(0.0, (110.0 - age) / 100.0))


def step_wealth(w, contribution, p, equity_gross, bond_gross):
    """Inject, rebalance to ``p``, accrue one period. Works elementwise on arrays."""
    return (w + contribution) * (p * equity_gross + (1.0 - p) * bond_gross)


def _check_fraction(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise ValueError(f"equity fraction {p} outside [0, 1]")
    return p


@dataclass(frozen=True)
class Constant:
    p: float

    def __post_init__(self):
        object.__setattr__(self, "p", _check_fraction(self.p))

    def fractions(self, T: int) -> np.ndarray:
        return np.full(T, self.p)

    def to_json(self) -> dict:
        return {"constant": self.p}

    @property
    def label(self) -> str:
        return f"constant p={self.p:g}"


@dataclass(frozen=True)
class Glide:
    path: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.array(self.path, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("glide path must be a non-empty sequence")
        if np.any(~(p >= 0.0) | ~(p <= 1.0)):
            raise ValueError("glide fractions must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "path", p)

    def fractions(self, T: int) -> np.ndarray:
        if self.path.size != T:
            raise ValueError(f"glide has {self.path.size} entries, horizon is {T}")
        return self.path

    def to_json(self) -> dict:
        return {"glide": [float(v) for v in self.path]}

    @property
    def label(self) -> str:
        return "glide path"

    @classmethod
    def linear(cls, start: float, end: float, T: int) -> "Glide":
        return cls(np.linspace(start, end, T))

    @classmethod
    def age_based(cls, start_age: float, T: int) -> "Glide":
        return cls([age_based_fraction(start_age + t) for t in range(T)])


@dataclass(frozen=True)
class Adaptive:
    policy: "PolicyGrid"
    source: Optional[str] = None

    def to_json(self) -> dict:
        return {"adaptive": self.source or "policy.json"}

    @property
    def label(self) -> str:
        return "adaptive"


Strategy = Union[Constant, Glide, Adaptive]

_ANNOTATIONS = ("provenance", "target_mean")


def strategy_from_json(obj: dict, base_dir: Optional[str] = None) -> Strategy:
    """Decode the tagged union ``{"constant": p}`` / ``{"glide": [...]}`` / ``{"adaptive": path}``.

    Annotation keys written alongside the strategy (provenance, target_mean) are ignored.
    """
    if isinstance(obj, dict):
        obj = {k: v for k, v in obj.items() if k not in _ANNOTATIONS}
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValueError(f"strategy must be a single-key object, got {obj!r}")
    (kind, val), = obj.items()
    if kind == "constant":
        return Constant(val)
    if kind == "glide":
        return Glide(val)
    if kind == "adaptive":
        import os

        from .adaptive import load_policy

        path = val if base_dir is None or os.path.isabs(val) else os.path.join(base_dir, val)
        return Adaptive(load_policy(path), source=val)
    raise ValueError(f"unknown strategy kind {kind!r}")


def load_strategy(path: str) -> Strategy:
    import os

    with open(path) as fh:
        obj = json.load(fh)
    return strategy_from_json(obj, os.path.dirname(os.path.abspath(path)))

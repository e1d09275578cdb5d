"""Fuzzy inference for destination choice.

Two Gaussian antecedents (time of day and position), singleton
fuzzification, product inference and a center-average defuzzifier.
:func:`fuzzy_system_eval` is the closed form of the composed system;
:func:`fuzzy_pipeline` runs the stages one by one and serves as its
cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DomainError, NoActivationError

TIME_WIDTH = 0.2
PLACE_WIDTH = 1e-4

Point = tuple[float, float]


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise DomainError(f"non-finite input {v!r}")


def time_membership(t: float, a: float) -> float:
    """Gaussian time-of-day membership, ``exp(-0.2 (t - a)^2)`` in hours."""
    _check_finite(t, a)
    return math.exp(-TIME_WIDTH * (t - a) ** 2)


def place_membership(p: Sequence[float], center: Sequence[float]) -> float:
    """Gaussian place membership, ``exp(-1e-4 * |p - center|^2)`` in meters."""
    x, y = p
    a, b = center
    _check_finite(x, y, a, b)
    return math.exp(-PLACE_WIDTH * ((x - a) ** 2 + (y - b) ** 2))


@dataclass(frozen=True)
class Singleton:
    """Fuzzy singleton: membership 1 at ``value``, 0 everywhere else."""

    value: float

    def membership(self, x: float) -> float:
        return 1.0 if x == self.value else 0.0

    @property
    def support(self) -> tuple[float]:
        return (self.value,)


def singleton_fuzzify(x: float) -> Singleton:
    _check_finite(x)
    return Singleton(float(x))


@dataclass(frozen=True)
class TimeMembership:
    label: str
    center_a: float

    def __call__(self, t: float) -> float:
        return time_membership(t, self.center_a)


@dataclass(frozen=True)
class PlaceMembership:
    center: Point

    def __call__(self, p: Sequence[float]) -> float:
        return place_membership(p, self.center)


@dataclass(frozen=True)
class FuzzyRule:
    """IF time is ``time_label`` AND place is ``place_site`` THEN go to ``consequent_center``."""

    time_label: str
    place_site: str
    consequent_center: Point


@dataclass(frozen=True)
class RuleActivation:
    rule: FuzzyRule
    weight: float


def center_average_defuzzify(activations: Iterable[tuple[object, float]]):
    """Weighted mean of rule centers.

    Centers may be scalars or fixed-length vectors; vectors are averaged
    coordinate-wise and returned as a tuple.
    """
    pairs = list(activations)
    if not pairs:
        raise NoActivationError("no activations")
    centers = np.asarray([c for c, _ in pairs], dtype=float)
    weights = np.asarray([w for _, w in pairs], dtype=float)
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise DomainError("weights must be finite and non-negative")
    total = weights.sum()
    if total <= 0.0:
        raise NoActivationError("all rule weights are zero")
    out = weights @ centers / total
    if centers.ndim == 1:
        return float(out)
    return tuple(float(v) for v in out)


def infer(
    time_input: Singleton,
    place_input: tuple[Singleton, Singleton],
    rules: Sequence[FuzzyRule],
    time_centers: Mapping[str, float],
    site_centers: Mapping[str, Point],
) -> list[RuleActivation]:
    """Product inference over singleton inputs.

    The sup over the input universe of ``mu_input(x) * prod mu_rule(x)`` is
    taken over the singleton supports, the only points where the input
    membership is non-zero.
    """
    px, py = place_input
    out = []
    for rule in rules:
        mu_t = TimeMembership(rule.time_label, time_centers[rule.time_label])
        mu_p = PlaceMembership(site_centers[rule.place_site])
        best = 0.0
        for t in time_input.support:
            for x in px.support:
                for y in py.support:
                    w = (
                        time_input.membership(t)
                        * px.membership(x)
                        * py.membership(y)
                        * mu_t(t)
                        * mu_p((x, y))
                    )
                    best = max(best, w)
        out.append(RuleActivation(rule, best))
    return out


def fuzzy_pipeline(
    t: float,
    p: Sequence[float],
    rules: Sequence[FuzzyRule],
    time_centers: Mapping[str, float],
    site_centers: Mapping[str, Point],
) -> Point:
    """Fuzzify, infer and defuzzify as three separate stages."""
    if not rules:
        raise ConfigError("empty rule set", key="rules")
    acts = infer(
        singleton_fuzzify(t),
        (singleton_fuzzify(p[0]), singleton_fuzzify(p[1])),
        rules,
        time_centers,
        site_centers,
    )
    return center_average_defuzzify((a.rule.consequent_center, a.weight) for a in acts)


def rule_weights(
    t: float,
    p: Sequence[float],
    rules: Sequence[FuzzyRule],
    time_centers: Mapping[str, float],
    site_centers: Mapping[str, Point],
) -> np.ndarray:
    _check_finite(t, p[0], p[1])
    try:
        a = np.array([time_centers[r.time_label] for r in rules], dtype=float)
        c = np.array([site_centers[r.place_site] for r in rules], dtype=float)
    except KeyError as exc:
        raise ConfigError("rule references an unknown label or site", key=exc.args[0]) from None
    d2 = (p[0] - c[:, 0]) ** 2 + (p[1] - c[:, 1]) ** 2
    return np.exp(-TIME_WIDTH * (t - a) ** 2) * np.exp(-PLACE_WIDTH * d2)


def fuzzy_system_eval(
    t: float,
    p: Sequence[float],
    rules: Sequence[FuzzyRule],
    time_centers: Mapping[str, float],
    site_centers: Mapping[str, Point],
) -> Point:
    """Closed-form fuzzy system output for crisp inputs ``t`` (hours) and ``p``.

    Raises :class:`NoActivationError` when every weight underflows to zero.
    """
    if not rules:
        raise ConfigError("empty rule set", key="rules")
    w = rule_weights(t, p, rules, time_centers, site_centers)
    total = w.sum()
    if total <= 0.0:
        raise NoActivationError("all rule weights underflowed")
    y = np.array([r.consequent_center for r in rules], dtype=float)
    x_out, y_out = w @ y / total
    return float(x_out), float(y_out)

"""Geodesic scoring, constructiveness labels and decision-process profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .corpus import GameRecord, LatLon, SoloGuess
from .errors import PipelineError

EARTH_RADIUS_KM = 6371.0


def arc_distance(a: LatLon, b: LatLon) -> float:
    """Great-circle distance in km by the spherical law of cosines."""
    if a[0] == b[0] and a[1] == b[1]:
        return 0.0  # rounding in the cosine would otherwise leave ~1e-4 km
    phi1, phi2 = math.radians(a[0]), math.radians(b[0])
    dlam = math.radians(b[1] - a[1])
    cos_d = math.sin(phi1) * math.sin(phi2) + math.cos(phi1) * math.cos(phi2) * math.cos(dlam)
    return EARTH_RADIUS_KM * math.acos(min(1.0, max(-1.0, cos_d)))


def score(guess: LatLon, truth: LatLon) -> float:
    """Negative distance in km; higher is better and 0 is an exact hit."""
    return -arc_distance(guess, truth)


@dataclass(frozen=True)
class ConstructivenessLabel:
    c_avg: float
    c_best: float
    c_worst: float
    team_score: float
    mean_solo: float
    best_solo: float
    worst_solo: float

    @property
    def obj_best(self) -> bool:
        return self.c_best > 0

    @property
    def obj_constructive(self) -> bool:
        return self.c_avg > 0

    @property
    def obj_worst(self) -> bool:
        return self.c_worst < 0

    def objective(self, name: str) -> bool:
        key = name.upper()
        if key == "PP":
            return self.obj_best
        if key == "P":
            return self.obj_constructive
        if key == "MM":
            return self.obj_worst
        raise ValueError(f"unknown objective {name!r}")


def constructiveness_from_scores(
    team_score: float, solo_scores: Sequence[float]
) -> ConstructivenessLabel:
    """Arithmetic core on raw scores (any units)."""
    if not solo_scores:
        raise PipelineError("NO_SOLO_GUESSES")
    mean_solo = math.fsum(solo_scores) / len(solo_scores)
    best, worst = max(solo_scores), min(solo_scores)
    return ConstructivenessLabel(
        c_avg=team_score - mean_solo,
        c_best=team_score - best,
        c_worst=team_score - worst,
        team_score=team_score,
        mean_solo=mean_solo,
        best_solo=best,
        worst_solo=worst,
    )


def constructiveness(
    team_guess: LatLon, solo_guesses: Sequence[SoloGuess], truth: LatLon
) -> ConstructivenessLabel:
    # Players without a solo guess simply do not appear in solo_guesses.
    return constructiveness_from_scores(
        score(team_guess, truth), [score(g.location, truth) for g in solo_guesses]
    )


def game_label(game: GameRecord) -> ConstructivenessLabel:
    if game.final_guess is None:
        raise PipelineError("NO_TEAM_GUESS", game.game_id)
    return constructiveness(game.final_guess, game.solo_guesses, game.true_location)


def convergence_profile(game: GameRecord, k: int = 3) -> list[float]:
    """Distances (km) of the last ``k`` marker moves to the final guess, oldest first."""
    if game.final_guess is None or len(game.marker_moves) < k or k < 1:
        raise PipelineError("TOO_FEW_GUESSES", game.game_id)
    return [arc_distance(m.location, game.final_guess) for m in game.marker_moves[-k:]]


@dataclass(frozen=True)
class ScoreProfile:
    scores: list[float]
    mean_solo: float
    final: float


def score_profile(game: GameRecord, k: int = 3) -> ScoreProfile:
    """Scores of the first ``k`` marker moves, with the solo mean and final score."""
    if game.final_guess is None or len(game.marker_moves) < k or k < 1:
        raise PipelineError("TOO_FEW_GUESSES", game.game_id)
    truth = game.true_location
    solo = [score(g.location, truth) for g in game.solo_guesses]
    return ScoreProfile(
        scores=[score(m.location, truth) for m in game.marker_moves[:k]],
        mean_solo=math.fsum(solo) / len(solo) if solo else float("nan"),
        final=score(game.final_guess, truth),
    )


def initial_bearing(a: LatLon, b: LatLon) -> float:
    """Initial great-circle bearing from ``a`` to ``b`` in degrees clockwise from north."""
    phi1, phi2 = math.radians(a[0]), math.radians(b[0])
    dlam = math.radians(b[1] - a[1])
    x = math.sin(dlam) * math.cos(phi2)
    y = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)
    return math.degrees(math.atan2(x, y)) % 360.0


def destination(start: LatLon, bearing_deg: float, dist_km: float) -> LatLon:
    """Point reached by travelling ``dist_km`` along a great circle from ``start``."""
    delta = dist_km / EARTH_RADIUS_KM
    theta = math.radians(bearing_deg)
    phi1, lam1 = math.radians(start[0]), math.radians(start[1])
    sin_phi2 = math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(theta)
    phi2 = math.asin(min(1.0, max(-1.0, sin_phi2)))
    lam2 = lam1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(phi1),
        math.cos(delta) - math.sin(phi1) * sin_phi2,
    )
    lon = (math.degrees(lam2) + 540.0) % 360.0 - 180.0
    return LatLon(max(-90.0, min(90.0, math.degrees(phi2))), lon)

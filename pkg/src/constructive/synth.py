"""Deterministic synthetic team games with planted conversational contrasts.

Archetypes differ in how evenly members talk and move the marker, how often
ideas are hedged, how much they agree, how confident members are, and whether
marker moves drift toward or away from the truth.  Labels are never set
directly: they follow from the simulated guesses via :mod:`constructive.geo`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping

import numpy as np

from .corpus import ChatMessage, GameRecord, LatLon, MarkerMove, SoloGuess
from .errors import PipelineError
from .geo import arc_distance, destination, initial_bearing

BASE_EPOCH = 1_700_000_000.0


@dataclass(frozen=True)
class ArchetypeConfig:
    name: str
    team_size: int = 3
    concentration: float = 20.0  # Dirichlet concentration of who talks / moves
    hedge_rate: float = 0.3
    idea_budget: int = 3
    agreement_rate: float = 0.4
    drift_km: float = 300.0  # per marker move; negative walks away from the truth
    drift_sd_km: float = 0.0  # game-to-game spread of the drift
    solo_error_km: float = 1500.0
    move_jitter_km: float = 60.0
    confidence_mean: float = 0.6
    geo_rate: float = 0.5
    quick_rate: float = 0.0  # share of games whose whole interaction fits in 20 s
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("hedge_rate", "agreement_rate", "confidence_mean", "geo_rate", "quick_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.team_size < 2:
            raise ValueError("team_size must be >= 2")


PRESETS: dict[str, ArchetypeConfig] = {
    "balanced": ArchetypeConfig(
        "balanced", concentration=30.0, hedge_rate=0.15, idea_budget=3, agreement_rate=0.6,
        drift_km=220.0, drift_sd_km=150.0, solo_error_km=1200.0, move_jitter_km=80.0,
        confidence_mean=0.65, geo_rate=0.7, quick_rate=0.1,
    ),
    "dominated": ArchetypeConfig(
        "dominated", concentration=1.0, hedge_rate=0.6, idea_budget=3, agreement_rate=0.3,
        drift_km=-120.0, drift_sd_km=150.0, solo_error_km=1200.0, move_jitter_km=250.0,
        confidence_mean=0.45, geo_rate=0.35, quick_rate=0.1,
    ),
}

CLUES = ("buildings", "flag", "sign", "road", "palm", "architecture", "cars", "trees",
         "mountains", "desert", "church", "mosque", "temple", "beach", "script", "bus",
         "farm", "snow", "river", "bridge", "plates", "fence", "roof", "market")
PLACES = ("china", "japan", "brazil", "france", "kenya", "india", "mexico", "russia",
          "spain", "egypt", "peru", "canada", "norway", "thailand", "australia", "turkey",
          "asia", "europe", "africa", "shanghai", "tokyo", "cairo", "lima", "oslo")
GEO_WORDS = ("coast", "north", "south", "east", "west", "tropical", "village", "city",
             "border", "island", "region", "countryside", "highway", "capital")
HEDGES = ("maybe", "probably", "i think", "looks like", "could be", "might be", "i guess", "perhaps")
CERTAIN = ("definitely", "clearly", "must be", "for sure", "obviously", "certainly")
AGREE_OPENERS = ("sure,", "yeah", "yes", "agreed,", "ok", "exactly,", "good idea,")
DISAGREE_OPENERS = ("no,", "nope", "no way", "nah")
FILLERS = ("hmm", "where is the marker", "did you move the map", "lol", "i have no idea",
           "let me zoom", "what do you see", "the timer is running", "hi", "one sec")


def _choice(rng: np.random.Generator, seq):
    return seq[int(rng.integers(len(seq)))]


def _speaker_weights(rng: np.random.Generator, arch: ArchetypeConfig) -> np.ndarray:
    w = rng.dirichlet(np.full(arch.team_size, arch.concentration))
    return np.maximum(w, 1e-3) / np.maximum(w, 1e-3).sum()


def _intro(rng, arch, clue, place) -> tuple[str, bool]:
    geo = rng.random() < arch.geo_rate
    tail = f"{place}" if geo else "here"
    if rng.random() < arch.hedge_rate:
        h = _choice(rng, HEDGES)
        return _choice(rng, (
            f"{h} the {clue} means {tail}",
            f"the {clue} {h} {tail}",
            f"{h} {clue} {tail}",
        )), True
    c = _choice(rng, CERTAIN)
    return _choice(rng, (
        f"the {clue} is {c} {tail}",
        f"{clue} {c} {tail}",
        f"look at the {clue}, {c} {tail}",
    )), False


def _adopt(rng, arch, clue, place) -> str:
    geo = _choice(rng, GEO_WORDS) if rng.random() < arch.geo_rate else "there"
    body = _choice(rng, (f"the {clue} {geo}", f"{clue} near the {geo}", f"that {clue} fits {place}"))
    if rng.random() < arch.agreement_rate:
        return f"{_choice(rng, AGREE_OPENERS)} {body}"
    if rng.random() < 0.3 * (1 - arch.agreement_rate):
        return f"{_choice(rng, DISAGREE_OPENERS)} {body}"
    if rng.random() < arch.hedge_rate:
        return f"{_choice(rng, HEDGES)} {body}"
    return body


def _conversation(rng, arch, players, weights) -> list[tuple[str, str]]:
    """(player, text) pairs; the first two messages come from different players."""
    n = len(players)
    msgs: list[tuple[str, str]] = []

    def speaker(exclude=None):
        w = weights.copy()
        if exclude is not None:
            w[players.index(exclude)] = 0.0
            w = w / w.sum()
        return players[int(rng.choice(n, p=w))]

    clues = list(rng.choice(len(CLUES), size=min(arch.idea_budget, len(CLUES)), replace=False))
    place = _choice(rng, PLACES)
    first = speaker()
    msgs.append((first, _choice(rng, FILLERS)))
    msgs.append((speaker(exclude=first), _choice(rng, FILLERS)))
    for ci in clues:
        clue = CLUES[int(ci)]
        intro_by = speaker()
        text, _ = _intro(rng, arch, clue, place)
        msgs.append((intro_by, text))
        for _ in range(int(rng.integers(1, n + 1))):
            msgs.append((speaker(exclude=intro_by), _adopt(rng, arch, clue, place)))
        if rng.random() < 0.5:
            msgs.append((speaker(), _choice(rng, FILLERS)))
    closing = speaker()
    if rng.random() < arch.agreement_rate:
        msgs.append((closing, f"{_choice(rng, AGREE_OPENERS)} {place} it is"))
    else:
        msgs.append((closing, f"{_choice(rng, HEDGES)} {place}, submit?"))
    return msgs


def _moves(rng, arch, players, weights, start: LatLon, truth: LatLon) -> list[tuple[str, LatLon]]:
    k = int(rng.integers(4, 9))
    drift = arch.drift_km + (rng.normal(0.0, arch.drift_sd_km) if arch.drift_sd_km else 0.0)
    out = []
    pos = start
    for _ in range(k):
        mover = players[int(rng.choice(len(players), p=weights))]
        d = arc_distance(pos, truth)
        if drift >= 0:
            step = min(drift * rng.uniform(0.6, 1.4), d)
            pos = destination(pos, initial_bearing(pos, truth), step) if d > 1e-9 else pos
        else:
            away = (initial_bearing(pos, truth) + 180.0) % 360.0
            pos = destination(pos, away, -drift * rng.uniform(0.6, 1.4))
        if arch.move_jitter_km > 0:
            pos = destination(pos, rng.uniform(0, 360), abs(rng.normal(0, arch.move_jitter_km)))
        out.append((mover, pos))
    return out


def _timeline(rng, n_events: int, quick: bool) -> tuple[np.ndarray, float]:
    """Event offsets from the anchor (first is 0) and the submit offset."""
    if quick:
        span = rng.uniform(8.0, 15.0)
        offsets = np.sort(rng.uniform(0.0, span, size=n_events))
        submit = span + rng.uniform(10.0, 60.0)
    else:
        span = rng.uniform(90.0, 200.0)
        offsets = np.sort(rng.uniform(0.0, span, size=n_events))
        # keep the first 20 s from holding most of the interaction
        cap = int(math.floor(0.5 * n_events))
        while np.sum(offsets < offsets[0] + 20.0) > cap:
            offsets = np.sort(rng.uniform(0.0, span, size=n_events))
        submit = span + rng.uniform(2.0, 20.0)
    offsets = np.round(offsets - offsets[0], 3)
    return offsets, float(submit)


@dataclass(frozen=True)
class ManifestEntry:
    game_id: str
    puzzle_id: str
    archetype: str
    quick: bool


def _truth_for(seed: int, puzzle: int) -> LatLon:
    rng = np.random.default_rng([seed, 10_000_019, puzzle])
    return LatLon(round(float(rng.uniform(-55, 65)), 5), round(float(rng.uniform(-179, 179)), 5))


def generate_game(index: int, arch: ArchetypeConfig, puzzle: int, seed: int) -> tuple[GameRecord, ManifestEntry]:
    rng = np.random.default_rng([seed, index])
    truth = _truth_for(seed, puzzle)
    players = [f"p{index}_{k}" for k in range(arch.team_size)]
    weights = _speaker_weights(rng, arch)
    started = BASE_EPOCH + 1000.0 * index
    anchor = started + 30.0

    solos = []
    for p in players:
        loc = destination(truth, rng.uniform(0, 360), abs(rng.normal(0, arch.solo_error_km)) + 50.0)
        conf = float(np.clip(rng.normal(arch.confidence_mean, 0.12), 0.0, 1.0))
        n_reason = int(rng.integers(1, 4))
        reason = " ".join(
            _choice(rng, (f"the {_choice(rng, CLUES)}", _choice(rng, PLACES), _choice(rng, GEO_WORDS),
                          _choice(rng, HEDGES), _choice(rng, CERTAIN)))
            for _ in range(n_reason)
        )
        solos.append(SoloGuess(p, LatLon(round(loc.lat, 5), round(loc.lon, 5)), round(conf, 3), reason))

    convo = _conversation(rng, arch, players, weights)
    start_player = players[int(rng.choice(len(players), p=weights))]
    start = next(s.location for s in solos if s.player == start_player)
    moves = _moves(rng, arch, players, weights, start, truth)

    quick = bool(rng.random() < arch.quick_rate)
    n_events = len(convo) + len(moves)
    offsets, submit = _timeline(rng, n_events, quick)
    # interleave: event kinds shuffled, the first event is always a message
    kinds = np.array([0] * len(convo) + [1] * len(moves))
    rest = rng.permutation(kinds[1:])
    kinds = np.concatenate([[0], rest])
    messages, marker_moves = [], []
    mi = vi = 0
    for kind, off in zip(kinds, offsets):
        ts = anchor + float(off)
        if kind == 0:
            p, text = convo[mi]
            messages.append(ChatMessage(p, ts, text))
            mi += 1
        else:
            p, loc = moves[vi]
            marker_moves.append(MarkerMove(p, ts, LatLon(round(loc.lat, 5), round(loc.lon, 5))))
            vi += 1
    game = GameRecord(
        game_id=f"g{index:05d}",
        puzzle_id=f"z{puzzle:03d}",
        true_location=truth,
        players=tuple(players),
        solo_guesses=tuple(solos),
        messages=tuple(messages),
        marker_moves=tuple(marker_moves),
        final_guess=marker_moves[-1].location,
        started_at=started,
        submitted_at=anchor + submit,
        window_leave=(),
    )
    return game, ManifestEntry(game.game_id, game.puzzle_id, arch.name, quick)


def _resolve_mix(archetype_mix: Mapping) -> list[tuple[ArchetypeConfig, float]]:
    out = []
    for key, w in archetype_mix.items():
        if isinstance(key, ArchetypeConfig):
            arch = key
        elif key in PRESETS:
            arch = PRESETS[key]
        else:
            raise PipelineError("INVALID_MIX", f"unknown archetype {key!r}")
        if w < 0:
            raise PipelineError("INVALID_MIX", "negative weight")
        out.append((arch, float(w)))
    if not out or abs(sum(w for _, w in out) - 1.0) > 1e-9:
        raise PipelineError("INVALID_MIX", "weights must sum to 1")
    return out


def generate_with_manifest(
    n_games: int,
    archetype_mix: Mapping | None = None,
    n_puzzles: int = 20,
    seed: int = 0,
) -> tuple[list[GameRecord], list[ManifestEntry]]:
    """Games are assigned to puzzles round-robin so every puzzle gets its share."""
    mix = _resolve_mix(archetype_mix or {"balanced": 0.5, "dominated": 0.5})
    probs = np.array([w for _, w in mix])
    games, manifest = [], []
    for i in range(n_games):
        pick = np.random.default_rng([seed, i, 7]).choice(len(mix), p=probs)
        g, m = generate_game(i, mix[int(pick)][0], i % n_puzzles, seed)
        games.append(g)
        manifest.append(m)
    return games, manifest


def generate_corpus(
    n_games: int,
    archetype_mix: Mapping | None = None,
    n_puzzles: int = 20,
    seed: int = 0,
) -> list[GameRecord]:
    return generate_with_manifest(n_games, archetype_mix, n_puzzles, seed)[0]


def manifest_to_dicts(manifest) -> list[dict]:
    return [asdict(m) for m in manifest]

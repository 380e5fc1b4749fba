"""Game records: parsing, validation, corpus filtering and utterance merging.

A corpus file is JSON Lines with one game per line::

    {"game_id": "g1", "puzzle_id": "p1", "true_location": {"lat": 1, "lon": 2},
     "players": ["a", "b"],
     "solo_guesses": [{"player": "a", "lat": 0, "lon": 0, "confidence": 0.5, "reason": "..."}],
     "messages": [{"player": "a", "ts": 10.0, "text": "hi", "tags": ["!"]}],
     "marker_moves": [{"player": "a", "ts": 12.0, "lat": 0, "lon": 0}],
     "final_guess": {"lat": 0, "lon": 0} | null,
     "started_at": 0, "submitted_at": 100,
     "window_leave": [{"player": "a", "ts": 30}]}

``tags`` and ``window_leave`` are optional.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Iterator, NamedTuple

from .errors import MalformedDocument, ValidationError

REASON_ORDER = (
    "NO_TEAM_GUESS",
    "DEV_PLAYER",
    "UNDER_TWO_CHATTERS",
    "CHEAT_URL",
    "CHEAT_PROXIMITY_FLAG",
    "SPARSE_PUZZLE",
)

URL_RE = re.compile(
    r"(?:\bhttps?://\S+|\bwww\.\S+"
    r"|\b[\w-]+(?:\.[\w-]+)*\.(?:com|org|net|io|gov|edu|info|co\.uk|de|fr)\b)",
    re.IGNORECASE,
)


class LatLon(NamedTuple):
    lat: float
    lon: float


@dataclass(frozen=True)
class SoloGuess:
    player: str
    location: LatLon
    confidence: float
    reason: str = ""


@dataclass(frozen=True)
class ChatMessage:
    player: str
    timestamp: float
    text: str
    tags: tuple[str, ...] | None = None


@dataclass(frozen=True)
class MarkerMove:
    player: str
    timestamp: float
    location: LatLon


@dataclass(frozen=True)
class WindowLeave:
    player: str
    timestamp: float


@dataclass(frozen=True)
class GameRecord:
    game_id: str
    puzzle_id: str
    true_location: LatLon
    players: tuple[str, ...]
    solo_guesses: tuple[SoloGuess, ...]
    messages: tuple[ChatMessage, ...]
    marker_moves: tuple[MarkerMove, ...]
    final_guess: LatLon | None
    started_at: float
    submitted_at: float
    # None means the telemetry was not recorded at all.
    window_leave: tuple[WindowLeave, ...] | None = None

    def solo_guess_for(self, player: str) -> SoloGuess | None:
        for g in self.solo_guesses:
            if g.player == player:
                return g
        return None


@dataclass(frozen=True)
class Utterance:
    player: str
    start: float
    end: float
    text: str
    message_indices: tuple[int, ...]


@dataclass
class FilterConfig:
    min_chatters: int = 2
    min_games_per_puzzle: int = 5
    cheat_radius_km: float = 10.0
    dev_player_ids: frozenset[str] = field(default_factory=frozenset)
    strict_cheat: bool = False


@dataclass
class FilterReport:
    kept: int = 0
    rejected: list[tuple[str, str]] = field(default_factory=list)

    def reason_counts(self) -> dict[str, int]:
        counts = Counter(reason for _, reason in self.rejected)
        return {r: counts.get(r, 0) for r in REASON_ORDER}


# -- parsing -----------------------------------------------------------------


class _Checker:
    def __init__(self) -> None:
        self.violations: list[tuple[str, str]] = []

    def fail(self, path: str, reason: str) -> None:
        self.violations.append((path, reason))

    def number(self, obj: Any, key: str, path: str) -> float | None:
        if not isinstance(obj, dict) or key not in obj:
            self.fail(f"{path}.{key}", "missing")
            return None
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(f"{path}.{key}", "not a finite number")
            return None
        return float(v)

    def string(self, obj: Any, key: str, path: str, allow_empty: bool = True) -> str | None:
        if not isinstance(obj, dict) or key not in obj:
            self.fail(f"{path}.{key}", "missing")
            return None
        v = obj[key]
        if not isinstance(v, str):
            self.fail(f"{path}.{key}", "not a string")
            return None
        if not allow_empty and not v.strip():
            self.fail(f"{path}.{key}", "empty")
            return None
        return v

    def latlon(self, obj: Any, path: str) -> LatLon | None:
        lat = self.number(obj, "lat", path)
        lon = self.number(obj, "lon", path)
        ok = True
        if lat is not None and not -90.0 <= lat <= 90.0:
            self.fail(f"{path}.lat", "out of range [-90, 90]")
            ok = False
        if lon is not None and not -180.0 <= lon <= 180.0:
            self.fail(f"{path}.lon", "out of range [-180, 180]")
            ok = False
        if lat is None or lon is None or not ok:
            return None
        return LatLon(lat, lon)

    def array(self, obj: dict, key: str, optional: bool = False) -> list | None:
        if key not in obj:
            if not optional:
                self.fail(f".{key}", "missing")
            return None
        v = obj[key]
        if not isinstance(v, list):
            self.fail(f".{key}", "not an array")
            return None
        return v


def normalize_confidence(value: float) -> float | None:
    """Map a raw confidence to [0, 1]; integers 1..5 are read as a Likert scale."""
    if 0.0 <= value <= 1.0:
        return float(value)
    if float(value).is_integer() and 1 <= value <= 5:
        return (value - 1.0) / 4.0
    return None


def game_from_dict(doc: Any) -> GameRecord:
    """Build a validated GameRecord; raise ValidationError listing every problem."""
    if not isinstance(doc, dict):
        raise MalformedDocument("top-level value is not an object")
    ck = _Checker()

    game_id = ck.string(doc, "game_id", "", allow_empty=False)
    puzzle_id = ck.string(doc, "puzzle_id", "", allow_empty=False)
    truth = None
    if isinstance(doc.get("true_location"), dict):
        truth = ck.latlon(doc["true_location"], ".true_location")
    else:
        ck.fail(".true_location", "missing or not an object")
    started = ck.number(doc, "started_at", "")
    submitted = ck.number(doc, "submitted_at", "")
    if started is not None and submitted is not None and submitted < started:
        ck.fail(".submitted_at", "before started_at")

    players: tuple[str, ...] = ()
    raw_players = ck.array(doc, "players")
    if raw_players is not None:
        if not all(isinstance(p, str) and p for p in raw_players):
            ck.fail(".players", "ids must be non-empty strings")
        elif len(set(raw_players)) != len(raw_players):
            ck.fail(".players", "duplicate ids")
        elif len(raw_players) < 2:
            ck.fail(".players", "fewer than 2 players")
        else:
            players = tuple(raw_players)
    known = set(players)

    def check_player(obj: Any, path: str) -> str | None:
        p = ck.string(obj, "player", path)
        if p is not None and known and p not in known:
            ck.fail(f"{path}.player", "unknown player id")
            return None
        return p

    def check_ts(ts: float | None, path: str) -> None:
        if ts is None or started is None or submitted is None:
            return
        if not started <= ts <= submitted:
            ck.fail(f"{path}.ts", "outside [started_at, submitted_at]")

    guesses: list[SoloGuess] = []
    seen_guessers: set[str] = set()
    for i, g in enumerate(ck.array(doc, "solo_guesses") or []):
        path = f".solo_guesses[{i}]"
        if not isinstance(g, dict):
            ck.fail(path, "not an object")
            continue
        p = check_player(g, path)
        loc = ck.latlon(g, path)
        conf_raw = ck.number(g, "confidence", path)
        conf = None
        if conf_raw is not None:
            conf = normalize_confidence(conf_raw)
            if conf is None:
                ck.fail(f"{path}.confidence", "not in [0,1] or integer 1-5")
        reason = g.get("reason", "")
        if not isinstance(reason, str):
            ck.fail(f"{path}.reason", "not a string")
            reason = ""
        if p is not None and p in seen_guessers:
            ck.fail(f"{path}.player", "second solo guess for player")
            continue
        if p is not None:
            seen_guessers.add(p)
        if p is not None and loc is not None and conf is not None:
            guesses.append(SoloGuess(p, loc, conf, reason))

    messages: list[ChatMessage] = []
    last_ts = -math.inf
    for i, m in enumerate(ck.array(doc, "messages") or []):
        path = f".messages[{i}]"
        if not isinstance(m, dict):
            ck.fail(path, "not an object")
            continue
        p = check_player(m, path)
        ts = ck.number(m, "ts", path)
        text = ck.string(m, "text", path, allow_empty=False)
        check_ts(ts, path)
        if ts is not None:
            if ts < last_ts:
                ck.fail(f"{path}.ts", "decreasing timestamp")
            last_ts = max(last_ts, ts)
        tags = m.get("tags")
        if tags is not None and not (
            isinstance(tags, list) and all(isinstance(t, str) for t in tags)
        ):
            ck.fail(f"{path}.tags", "not a list of strings")
            tags = None
        if p is not None and ts is not None and text is not None:
            messages.append(
                ChatMessage(p, ts, text, tuple(tags) if tags is not None else None)
            )

    moves: list[MarkerMove] = []
    last_ts = -math.inf
    for i, mv in enumerate(ck.array(doc, "marker_moves") or []):
        path = f".marker_moves[{i}]"
        if not isinstance(mv, dict):
            ck.fail(path, "not an object")
            continue
        p = check_player(mv, path)
        ts = ck.number(mv, "ts", path)
        loc = ck.latlon(mv, path)
        check_ts(ts, path)
        if ts is not None:
            if ts < last_ts:
                ck.fail(f"{path}.ts", "decreasing timestamp")
            last_ts = max(last_ts, ts)
        if p is not None and ts is not None and loc is not None:
            moves.append(MarkerMove(p, ts, loc))

    final = None
    if "final_guess" not in doc:
        ck.fail(".final_guess", "missing (use null when absent)")
    elif doc["final_guess"] is not None:
        if isinstance(doc["final_guess"], dict):
            final = ck.latlon(doc["final_guess"], ".final_guess")
        else:
            ck.fail(".final_guess", "not an object or null")

    leaves: list[WindowLeave] | None = None
    raw_leaves = ck.array(doc, "window_leave", optional=True)
    if raw_leaves is not None:
        leaves = []
        for i, w in enumerate(raw_leaves):
            path = f".window_leave[{i}]"
            if not isinstance(w, dict):
                ck.fail(path, "not an object")
                continue
            p = check_player(w, path)
            ts = ck.number(w, "ts", path)
            if p is not None and ts is not None:
                leaves.append(WindowLeave(p, ts))

    if ck.violations:
        raise ValidationError(ck.violations)
    return GameRecord(
        game_id=game_id,
        puzzle_id=puzzle_id,
        true_location=truth,
        players=players,
        solo_guesses=tuple(guesses),
        messages=tuple(messages),
        marker_moves=tuple(moves),
        final_guess=final,
        started_at=started,
        submitted_at=submitted,
        window_leave=tuple(leaves) if leaves is not None else None,
    )


def parse_game_record(document: str) -> GameRecord:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(str(exc)) from None
    return game_from_dict(doc)


def _ll(loc: LatLon) -> dict:
    return {"lat": loc.lat, "lon": loc.lon}


def game_to_dict(game: GameRecord) -> dict:
    out: dict[str, Any] = {
        "game_id": game.game_id,
        "puzzle_id": game.puzzle_id,
        "true_location": _ll(game.true_location),
        "players": list(game.players),
        "solo_guesses": [
            {"player": g.player, "lat": g.location.lat, "lon": g.location.lon,
             "confidence": g.confidence, "reason": g.reason}
            for g in game.solo_guesses
        ],
        "messages": [],
        "marker_moves": [
            {"player": m.player, "ts": m.timestamp, "lat": m.location.lat, "lon": m.location.lon}
            for m in game.marker_moves
        ],
        "final_guess": _ll(game.final_guess) if game.final_guess is not None else None,
        "started_at": game.started_at,
        "submitted_at": game.submitted_at,
    }
    for m in game.messages:
        d: dict[str, Any] = {"player": m.player, "ts": m.timestamp, "text": m.text}
        if m.tags is not None:
            d["tags"] = list(m.tags)
        out["messages"].append(d)
    if game.window_leave is not None:
        out["window_leave"] = [{"player": w.player, "ts": w.timestamp} for w in game.window_leave]
    return out


def dump_game(game: GameRecord) -> str:
    return json.dumps(game_to_dict(game), sort_keys=False, separators=(",", ":"))


def iter_corpus(path) -> Iterator[tuple[int, GameRecord]]:
    """Yield (line number, record); blank lines are skipped, errors propagate."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, parse_game_record(line)
            except (ValidationError, MalformedDocument) as exc:
                exc.lineno = lineno  # type: ignore[attr-defined]
                raise


def load_corpus(path) -> list[GameRecord]:
    return [g for _, g in iter_corpus(path)]


def write_corpus(games: Iterable[GameRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for g in games:
            fh.write(dump_game(g) + "\n")


# -- filtering ---------------------------------------------------------------


def has_url(text: str) -> bool:
    return URL_RE.search(text) is not None


def _proximity_reject(game: GameRecord, cfg: FilterConfig) -> bool:
    from .geo import arc_distance

    radius = cfg.cheat_radius_km
    team_close = (
        game.final_guess is not None
        and arc_distance(game.final_guess, game.true_location) <= radius
    )
    close_players = {
        g.player for g in game.solo_guesses
        if arc_distance(g.location, game.true_location) <= radius
    }
    if not team_close and not close_players:
        return False
    if game.window_leave is None:
        return cfg.strict_cheat
    leavers = {w.player for w in game.window_leave}
    if team_close and leavers:
        return True
    return bool(close_players & leavers)


def _first_failure(game: GameRecord, cfg: FilterConfig) -> str | None:
    if game.final_guess is None:
        return "NO_TEAM_GUESS"
    if cfg.dev_player_ids and set(game.players) & set(cfg.dev_player_ids):
        return "DEV_PLAYER"
    if len({m.player for m in game.messages}) < cfg.min_chatters:
        return "UNDER_TWO_CHATTERS"
    if any(has_url(m.text) for m in game.messages):
        return "CHEAT_URL"
    if _proximity_reject(game, cfg):
        return "CHEAT_PROXIMITY_FLAG"
    return None


def filter_corpus(
    games: list[GameRecord], cfg: FilterConfig | None = None
) -> tuple[list[GameRecord], FilterReport]:
    """Apply the quality filters; each rejection records its first failing reason.

    The per-puzzle sample count is taken over games that survived every other
    filter, which keeps the operation idempotent.
    """
    cfg = cfg or FilterConfig()
    reasons: dict[int, str] = {}
    for i, g in enumerate(games):
        r = _first_failure(g, cfg)
        if r is not None:
            reasons[i] = r
    per_puzzle = Counter(g.puzzle_id for i, g in enumerate(games) if i not in reasons)
    for i, g in enumerate(games):
        if i not in reasons and per_puzzle[g.puzzle_id] < cfg.min_games_per_puzzle:
            reasons[i] = "SPARSE_PUZZLE"
    kept = [g for i, g in enumerate(games) if i not in reasons]
    report = FilterReport(
        kept=len(kept),
        rejected=[(games[i].game_id, reasons[i]) for i in sorted(reasons)],
    )
    return kept, report


# -- turns -------------------------------------------------------------------


def derive_utterances(messages: Iterable[ChatMessage]) -> list[Utterance]:
    """Merge maximal runs of consecutive messages by the same player."""
    out: list[Utterance] = []
    for i, m in enumerate(messages):
        if out and out[-1].player == m.player:
            last = out[-1]
            out[-1] = replace(
                last,
                end=m.timestamp,
                text=f"{last.text} {m.text}",
                message_indices=last.message_indices + (i,),
            )
        else:
            out.append(Utterance(m.player, m.timestamp, m.timestamp, m.text, (i,)))
    return out


def turns(utterances: list[Utterance]) -> list[tuple[Utterance, Utterance]]:
    return list(zip(utterances, utterances[1:]))

"""Feature assembly: linguistic, POS n-gram, baseline and interaction features.

``featurize_game`` produces a :class:`FeatureVector` whose scalar part follows
``REGISTRY`` in order, followed by a ``pos.*`` block over a fitted vocabulary.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .corpus import GameRecord, Utterance, derive_utterances
from .dynamics import (
    confidence_feature,
    guess_dynamics,
    matching_features,
    participation_indicators,
    stance_features,
    word_tokens,
)
from .errors import PipelineError
from .ideaflow import extract_ideas, idea_features
from .text import Resources, Token, concreteness_ratings, lexicon_hits, load_resources, tokenize

BASELINE, INTERACTION, LINGUISTIC, POS = "baseline", "interaction", "linguistic", "pos"
GROUPS = (BASELINE, LINGUISTIC, INTERACTION, POS)

_BASE = ("team_size", "msgs_per_player", "duration_s")
_IDEAS = ("count", "unanimous_count", "max_introduced", "intro_entropy",
          "intro_hedged_frac", "adopt_hedged_frac")
_DYN = ("all_chat", "all_move", "two_plus_move", "entropy_msgs", "entropy_words_per_msg",
        "entropy_moves", "match_stop", "match_content", "match_posbi", "match_stop_maxpair",
        "match_content_maxpair", "match_posbi_maxpair", "agree_count", "disagree_count",
        "median_jump", "median_cross_jump", "mean_confidence")
_LNG = ("words_per_msg", "solo_reason_words", "ttr", "mean_turn_gap_s", "num_turns",
        "certainty_frac", "hedge_frac", "pron_1sg_frac", "pron_1pl_frac", "pron_2_frac",
        "concreteness", "geo_frac", "interface_frac")

REGISTRY: tuple[tuple[str, str], ...] = (
    tuple((f"base.{n}", BASELINE) for n in _BASE)
    + tuple((f"ideas.{n}", INTERACTION) for n in _IDEAS)
    + tuple((f"dyn.{n}", INTERACTION) for n in _DYN)
    + tuple((f"lng.{n}", LINGUISTIC) for n in _LNG)
)
SCALAR_NAMES = tuple(n for n, _ in REGISTRY)
GROUP_OF = dict(REGISTRY)

BOUNDARY = "#"


@dataclass
class GameText:
    """Tagged view of a game's conversation."""

    message_tokens: list[list[Token]]
    utterances: list[Utterance]
    utterance_tokens: list[list[Token]]
    reason_tokens: list[list[Token]]


def analyze_text(game: GameRecord, resources: Resources) -> GameText:
    msg_tokens = [resources.tag(m.text, m.tags) for m in game.messages]
    utts = derive_utterances(game.messages)
    utt_tokens = [
        [tok for i in u.message_indices for tok in msg_tokens[i]] for u in utts
    ]
    reasons = [tokenize(g.reason) for g in game.solo_guesses]
    return GameText(msg_tokens, utts, utt_tokens, reasons)


def _is_word(tok: Token) -> bool:
    return tok.tag != "," if tok.tag is not None else any(ch.isalnum() for ch in tok.surface)


def length_features(game: GameRecord, gt: GameText) -> dict[str, float | None]:
    words = [t for toks in gt.message_tokens for t in word_tokens(toks)]
    n_msgs = len(game.messages)
    gaps = [b.start - a.end for a, b in zip(gt.utterances, gt.utterances[1:])]
    return {
        "lng.words_per_msg": len(words) / n_msgs if n_msgs else None,
        "lng.solo_reason_words": float(
            sum(1 for toks in gt.reason_tokens for t in toks if _is_word(t))
        ),
        "lng.ttr": len({t.norm for t in words}) / len(words) if words else None,
        "lng.mean_turn_gap_s": sum(gaps) / len(gaps) if gaps else None,
        "lng.num_turns": float(max(len(gt.utterances) - 1, 0)),
    }


_LEXICON_FEATURES = (
    ("lng.certainty_frac", "certainty"),
    ("lng.hedge_frac", "hedges"),
    ("lng.pron_1sg_frac", "pron_1sg"),
    ("lng.pron_1pl_frac", "pron_1pl"),
    ("lng.pron_2_frac", "pron_2"),
    ("lng.geo_frac", "geo"),
    ("lng.interface_frac", "interface"),
)


def lexicon_features(gt: GameText, resources: Resources) -> dict[str, float | None]:
    """Lexicon hits per chat word, plus mean concreteness of content words."""
    n_words = sum(len(word_tokens(toks)) for toks in gt.message_tokens)
    out: dict[str, float | None] = {}
    for name, lex_name in _LEXICON_FEATURES:
        lex = resources.geo if lex_name == "geo" else resources.lexicons[lex_name]
        hits = sum(lexicon_hits(word_tokens(toks), lex)[0] for toks in gt.message_tokens)
        out[name] = hits / n_words if n_words else None
    ratings = [r for toks in gt.message_tokens for r in concreteness_ratings(toks, resources.concreteness)]
    out["lng.concreteness"] = sum(ratings) / len(ratings) if ratings else None
    return out


# -- POS n-grams -------------------------------------------------------------


def pos_ngram_counts(gt: GameText, max_n: int = 3) -> Counter:
    """Counts of tag n-grams of every order 1..max_n, per message.

    Orders >= 2 see one boundary symbol on each side of a message.
    """
    counts: Counter = Counter()
    for toks in gt.message_tokens:
        tags = [t.tag for t in toks]
        counts.update((t,) for t in tags)
        padded = [BOUNDARY] + tags + [BOUNDARY]
        for n in range(2, max_n + 1):
            for i in range(len(padded) - n + 1):
                counts[tuple(padded[i:i + n])] += 1
    return counts


def pos_feature_name(gram: tuple[str, ...]) -> str:
    return "pos." + " ".join(gram)


@dataclass(frozen=True)
class PosVocabulary:
    n: int
    min_df: int
    grams: tuple[tuple[str, ...], ...]

    def names(self) -> list[str]:
        return [pos_feature_name(g) for g in self.grams]

    def to_dict(self) -> dict:
        return {"n": self.n, "min_df": self.min_df, "grams": [list(g) for g in self.grams]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "PosVocabulary":
        return cls(int(d["n"]), int(d["min_df"]), tuple(tuple(g) for g in d["grams"]))


def fit_pos_vocabulary(counts: Iterable[Counter], n: int, min_df: int) -> PosVocabulary:
    df: Counter = Counter()
    for c in counts:
        df.update({g for g in c if len(g) <= n})
    grams = sorted(g for g, k in df.items() if k >= min_df)
    grams.sort(key=len)
    return PosVocabulary(n, min_df, tuple(grams))


def pos_ngram_features(counts: Counter, vocab: PosVocabulary) -> dict[str, float]:
    """Relative frequency of each vocabulary n-gram among the game's n-grams of that order."""
    totals: Counter = Counter()
    for g, k in counts.items():
        totals[len(g)] += k
    return {
        pos_feature_name(g): counts.get(g, 0) / totals[len(g)] if totals[len(g)] else 0.0
        for g in vocab.grams
    }


# -- baseline and early window ----------------------------------------------


def anchor_time(game: GameRecord) -> float | None:
    stamps = []
    if game.messages:
        stamps.append(game.messages[0].timestamp)
    if game.marker_moves:
        stamps.append(game.marker_moves[0].timestamp)
    return min(stamps) if stamps else None


def baseline_features(game: GameRecord) -> dict[str, float]:
    anchor = anchor_time(game)
    if anchor is None:
        anchor = game.started_at
    return {
        "base.team_size": float(len(game.players)),
        "base.msgs_per_player": len(game.messages) / len(game.players),
        "base.duration_s": max(game.submitted_at - anchor, 0.0),
    }


@dataclass(frozen=True)
class EarlyWindow:
    game: GameRecord
    eligible: bool
    coverage_fraction: float


def early_window(game: GameRecord, horizon_s: float = 20.0, max_coverage: float = 0.75) -> EarlyWindow:
    """Keep chat messages and marker moves strictly before ``anchor + horizon_s``.

    The anchor is the first message or marker move.  A game is eligible when the
    window covers at most ``max_coverage`` of its events.  Solo-phase data is kept.
    """
    anchor = anchor_time(game)
    if anchor is None:
        raise PipelineError("NO_EVENTS", game.game_id)
    cutoff = anchor + horizon_s
    msgs = tuple(m for m in game.messages if m.timestamp < cutoff)
    moves = tuple(m for m in game.marker_moves if m.timestamp < cutoff)
    leaves = game.window_leave
    if leaves is not None:
        leaves = tuple(w for w in leaves if w.timestamp < cutoff)
    total = len(game.messages) + len(game.marker_moves)
    coverage = (len(msgs) + len(moves)) / total
    truncated = replace(
        game,
        messages=msgs,
        marker_moves=moves,
        window_leave=leaves,
        submitted_at=min(game.submitted_at, cutoff),
    )
    return EarlyWindow(truncated, coverage <= max_coverage, coverage)


# -- assembly ----------------------------------------------------------------


@dataclass
class FeatureVector:
    names: list[str]
    values: list[float]
    mask: list[bool]  # True where the feature is missing
    groups: list[str]
    pos_counts: Counter = field(default_factory=Counter, repr=False)

    def as_dict(self) -> dict[str, float | None]:
        return {n: (None if m else v) for n, v, m in zip(self.names, self.values, self.mask)}


def scalar_features(game: GameRecord, resources: Resources, gt: GameText | None = None) -> dict[str, float | None]:
    gt = gt or analyze_text(game, resources)
    feats: dict[str, float | None] = {}
    feats.update(baseline_features(game))
    ideas = extract_ideas(
        [m.player for m in game.messages], gt.message_tokens, resources.stopwords, resources.hedges
    )
    feats.update(idea_features(ideas, game.players))
    feats.update(participation_indicators(game, gt.message_tokens))
    feats.update(matching_features(gt.utterances, gt.utterance_tokens, resources.stopwords))
    stance = stance_features(gt.message_tokens, resources)
    feats["dyn.agree_count"] = stance["dyn.agree_count"]
    feats["dyn.disagree_count"] = stance["dyn.disagree_count"]
    feats.update(guess_dynamics(game.marker_moves))
    feats["dyn.mean_confidence"] = confidence_feature(game.solo_guesses)
    feats.update(length_features(game, gt))
    feats.update(lexicon_features(gt, resources))
    return {name: feats.get(name) for name in SCALAR_NAMES}


def featurize_game(
    game: GameRecord,
    resources: Resources | None = None,
    pos_vocab: PosVocabulary | None = None,
    max_n: int = 3,
) -> FeatureVector:
    resources = resources or load_resources()
    gt = analyze_text(game, resources)
    scalars = scalar_features(game, resources, gt)
    counts = pos_ngram_counts(gt, max(max_n, pos_vocab.n if pos_vocab else 0))
    names = list(SCALAR_NAMES)
    values, mask, groups = [], [], []
    for name in SCALAR_NAMES:
        v = scalars[name]
        bad = v is None or not math.isfinite(v)
        values.append(0.0 if bad else float(v))
        mask.append(bad)
        groups.append(GROUP_OF[name])
    if pos_vocab is not None:
        for name, v in pos_ngram_features(counts, pos_vocab).items():
            names.append(name)
            values.append(v)
            mask.append(False)
            groups.append(POS)
    return FeatureVector(names, values, mask, groups, counts)

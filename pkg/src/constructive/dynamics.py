"""Interaction-dynamics features: balance, participation, matching, stance, guesses."""

from __future__ import annotations

import math
import statistics
from collections import Counter, defaultdict
from typing import Mapping, Sequence

from .corpus import GameRecord, MarkerMove, SoloGuess, Utterance
from .errors import PipelineError
from .geo import arc_distance
from .text import AGREE, CONTENT_TAGS, DISAGREE, Resources, Token, detect_stance

STOPWORD, CONTENT, POS_BIGRAM = "STOPWORD", "CONTENT", "POS_BIGRAM"


def balance_entropy(values: Sequence[float]) -> float:
    """Entropy of the normalized values with log base ``len(values)``.

    1.0 when everyone contributes equally, 0.0 when one member does everything
    (and for all-zero input).
    """
    if len(values) < 2:
        raise PipelineError("SIZE_UNDER_TWO", f"got {len(values)} values")
    if any(v < 0 for v in values):
        raise ValueError("balance values must be non-negative")
    total = math.fsum(values)
    if total <= 0:
        return 0.0
    n = len(values)
    probs = [v / total for v in values]
    if all(p == probs[0] for p in probs):
        return 1.0
    h = -math.fsum(p * math.log(p) for p in probs if p > 0) / math.log(n)
    return min(1.0, max(0.0, h))


def word_tokens(tokens: Sequence[Token]) -> list[Token]:
    """Tokens that count as words (everything but punctuation)."""
    return [t for t in tokens if t.tag != ","]


def participation_indicators(
    game: GameRecord, message_tokens: Sequence[Sequence[Token]]
) -> dict[str, float]:
    players = game.players
    msgs = Counter(m.player for m in game.messages)
    words = Counter()
    for m, toks in zip(game.messages, message_tokens):
        words[m.player] += len(word_tokens(toks))
    moves = Counter(mv.player for mv in game.marker_moves)
    wpm = [words[p] / msgs[p] if msgs[p] else 0.0 for p in players]
    return {
        "dyn.all_chat": float(all(msgs[p] > 0 for p in players)),
        "dyn.all_move": float(all(moves[p] > 0 for p in players)),
        "dyn.two_plus_move": float(sum(1 for p in players if moves[p] > 0) >= 2),
        "dyn.entropy_msgs": balance_entropy([msgs[p] for p in players]),
        "dyn.entropy_words_per_msg": balance_entropy(wpm),
        "dyn.entropy_moves": balance_entropy([moves[p] for p in players]),
    }


def item_set(tokens: Sequence[Token], vocab_class: str, stopwords) -> frozenset:
    if vocab_class == STOPWORD:
        return frozenset(t.norm for t in tokens if t.norm in stopwords)
    if vocab_class == CONTENT:
        return frozenset(
            t.norm for t in tokens if t.tag in CONTENT_TAGS and t.norm not in stopwords
        )
    if vocab_class == POS_BIGRAM:
        tags = [t.tag for t in tokens]
        return frozenset(zip(tags, tags[1:]))
    raise ValueError(f"unknown vocabulary class {vocab_class!r}")


def matching(
    utterances: Sequence[Utterance],
    utterance_tokens: Sequence[Sequence[Token]],
    vocab_class: str,
    stopwords,
) -> tuple[float, float]:
    """Micro-averaged reply-repeats-message rate, overall and for the closest pair.

    A turn is an adjacent pair of utterances.  Turns whose earlier utterance has
    an empty item set contribute nothing.  Raises NO_TURNS when no turn counts.
    """
    sets = [item_set(toks, vocab_class, stopwords) for toks in utterance_tokens]
    num = den = 0
    pair_num: dict[frozenset, int] = defaultdict(int)
    pair_den: dict[frozenset, int] = defaultdict(int)
    for i in range(len(utterances) - 1):
        msg, reply = sets[i], sets[i + 1]
        if not msg:
            continue
        shared = len(msg & reply)
        pair = frozenset((utterances[i].player, utterances[i + 1].player))
        num += shared
        den += len(msg)
        pair_num[pair] += shared
        pair_den[pair] += len(msg)
    if den == 0:
        raise PipelineError("NO_TURNS")
    max_pair = max(pair_num[p] / pair_den[p] for p in pair_den)
    return num / den, max_pair


def stance_features(
    message_tokens: Sequence[Sequence[Token]], resources: Resources
) -> dict[str, float]:
    stances = [detect_stance(toks, resources.agree, resources.disagree) for toks in message_tokens]
    n = len(stances)
    agree = sum(s == AGREE for s in stances)
    disagree = sum(s == DISAGREE for s in stances)
    return {
        "dyn.agree_count": float(agree),
        "dyn.disagree_count": float(disagree),
        "dyn.agree_frac": agree / n if n else 0.0,
        "dyn.disagree_frac": disagree / n if n else 0.0,
    }


def guess_dynamics(moves: Sequence[MarkerMove]) -> dict[str, float | None]:
    jumps = [arc_distance(a.location, b.location) for a, b in zip(moves, moves[1:])]
    cross = [
        arc_distance(a.location, b.location)
        for a, b in zip(moves, moves[1:])
        if a.player != b.player
    ]
    return {
        "dyn.median_jump": statistics.median(jumps) if jumps else None,
        "dyn.median_cross_jump": statistics.median(cross) if cross else None,
    }


def confidence_feature(solo_guesses: Sequence[SoloGuess]) -> float | None:
    if not solo_guesses:
        return None
    return math.fsum(g.confidence for g in solo_guesses) / len(solo_guesses)


def matching_features(
    utterances: Sequence[Utterance],
    utterance_tokens: Sequence[Sequence[Token]],
    stopwords,
) -> Mapping[str, float | None]:
    out: dict[str, float | None] = {}
    for cls, name in ((STOPWORD, "stop"), (CONTENT, "content"), (POS_BIGRAM, "posbi")):
        try:
            overall, best = matching(utterances, utterance_tokens, cls, stopwords)
        except PipelineError:
            overall = best = None
        out[f"dyn.match_{name}"] = overall
        out[f"dyn.match_{name}_maxpair"] = best
    return out

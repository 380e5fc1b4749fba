"""Idea flow: words introduced by one player and picked up by another."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .dynamics import balance_entropy
from .text import Lexicon, Token, lexicon_hits

IDEA_TAGS = frozenset("N ^ A V".split())
MIN_TERM_LENGTH = 2


@dataclass(frozen=True)
class Adoption:
    player: str
    msg_index: int
    hedged: bool


@dataclass(frozen=True)
class IdeaEvent:
    term: str
    introducer: str
    intro_msg_index: int
    intro_hedged: bool
    adoptions: tuple[Adoption, ...]

    def adopters(self) -> list[str]:
        return [a.player for a in self.adoptions]

    def to_dict(self) -> dict:
        return {
            "term": self.term,
            "introducer": self.introducer,
            "intro_msg_index": self.intro_msg_index,
            "intro_hedged": self.intro_hedged,
            "adoptions": [
                {"player": a.player, "msg_index": a.msg_index, "hedged": a.hedged}
                for a in self.adoptions
            ],
        }


def is_candidate(tok: Token, stopwords: Lexicon) -> bool:
    return (
        tok.tag in IDEA_TAGS
        and len(tok.norm) >= MIN_TERM_LENGTH
        and tok.norm not in stopwords
    )


def extract_ideas(
    speakers: Sequence[str],
    message_tokens: Sequence[Sequence[Token]],
    stopwords: Lexicon,
    hedges: Lexicon,
) -> list[IdeaEvent]:
    """Single pass over the conversation tracking who first used each candidate word.

    ``speakers[i]`` wrote message ``i``.  An idea is reported only once a second
    player uses its word; each other player's first use counts as an adoption.
    """
    hedged = [lexicon_hits(toks, hedges)[0] > 0 for toks in message_tokens]
    intro: dict[str, tuple[str, int]] = {}
    adoptions: dict[str, list[Adoption]] = {}
    for i, (player, toks) in enumerate(zip(speakers, message_tokens)):
        for tok in toks:
            if not is_candidate(tok, stopwords):
                continue
            term = tok.norm
            if term not in intro:
                intro[term] = (player, i)
                adoptions[term] = []
                continue
            introducer, _ = intro[term]
            if player == introducer or any(a.player == player for a in adoptions[term]):
                continue
            adoptions[term].append(Adoption(player, i, hedged[i]))
    ideas = [
        IdeaEvent(term, intro[term][0], intro[term][1], hedged[intro[term][1]], tuple(adopts))
        for term, adopts in adoptions.items()
        if adopts
    ]
    # dict insertion order already follows first use; sort keeps ties stable
    ideas.sort(key=lambda e: e.intro_msg_index)
    return ideas


def is_unanimous(idea: IdeaEvent, players: Sequence[str]) -> bool:
    others = set(players) - {idea.introducer}
    return others <= set(idea.adopters())


def idea_features(ideas: Sequence[IdeaEvent], players: Sequence[str]) -> dict[str, float]:
    intro_counts = Counter(e.introducer for e in ideas)
    n_adopt = sum(len(e.adoptions) for e in ideas)
    hedged_adopt = sum(a.hedged for e in ideas for a in e.adoptions)
    return {
        "ideas.count": float(len(ideas)),
        "ideas.unanimous_count": float(sum(is_unanimous(e, players) for e in ideas)),
        "ideas.max_introduced": float(max(intro_counts.values(), default=0)),
        "ideas.intro_entropy": balance_entropy([intro_counts[p] for p in players]),
        "ideas.intro_hedged_frac": (
            sum(e.intro_hedged for e in ideas) / len(ideas) if ideas else 0.0
        ),
        "ideas.adopt_hedged_frac": hedged_adopt / n_adopt if n_adopt else 0.0,
    }

"""Tokenization, coarse POS tagging and lexicon resources for chat text.

Tags follow a coarse Twitter-style set::

    N noun   ^ proper noun   V verb   A adjective   R adverb   O pronoun
    P preposition   D determiner   & conjunction   $ numeral   ! interjection
    E emoticon   U URL   , punctuation   G other
"""

from __future__ import annotations

import hashlib
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources as importlib_resources
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

TAGS = frozenset("N ^ V A R O P D & $ ! E U , G".split())
CONTENT_TAGS = frozenset("N ^ A R V".split())

EMOTICONS = frozenset(
    ":) :( :D :P :p ;) ;-) :-) :-( :-D :-P :/ :-/ :\\ :o :O :| :'( xD XD <3 ^^ ^_^ -_- :3 =) =(".split()
)
URL_TOKEN_RE = re.compile(r"^(?:https?://|www\.)\S+$", re.IGNORECASE)
NUMERAL_RE = re.compile(r"^[+-]?\d+(?:[.,:]\d+)*(?:st|nd|rd|th|s|k|km|m|mi|am|pm)?$", re.IGNORECASE)
_EDGE_RE = re.compile(r"^([^\w]*)(.*?)([^\w]*)$", re.DOTALL)

PRONOUNS = frozenset(
    """i me my mine myself you your yours yourself yourselves he him his himself she
    her hers herself it its itself we us our ours ourselves they them their theirs
    themselves this that these those who whom whose what which someone something
    anyone anything everyone everything nobody nothing i'm im i'd i'll i've it's
    that's thats you're youre we're they're he's she's there's theres what's whats
    u ur ya let's lets""".split()
)
DETERMINERS = frozenset("a an the some any every each all both either neither no another such".split())
PREPOSITIONS = frozenset(
    """in on at to from of for with by about into onto over under near between
    through across along around behind beside above below after before during
    without within toward towards upon like than off out up down via""".split()
)
CONJUNCTIONS = frozenset("and or but nor so yet because although though if unless while whereas".split())
MODALS_AUX = frozenset(
    """would could should might may must can will shall 'd 'll is are was were be
    been being am do does did have has had don't dont doesn't didn't isn't aren't
    wasn't weren't can't cant couldn't wouldn't shouldn't won't haven't hasn't""".split()
)
COMMON_VERBS = frozenset(
    """think guess know see look looks go say says said agree put move try need want
    seem seems get got make take let feel mean find found come went saw work works
    believe suppose zoom click submit check read thought knew""".split()
)
INTERJECTIONS = frozenset(
    "yes yeah yea yep yup ok okay oh ohh hmm hm um uh lol haha hahaha hi hey hello wow ah aha nope nah no thanks".split()
)
ADVERBS = frozenset(
    """not very too also just here there maybe perhaps now then again still already
    even only probably definitely really quite so almost never always ever well
    more most less least somewhere anywhere everywhere""".split()
)
ADJECTIVES = frozenset(
    """good bad sure right wrong same different big small old new hot cold green red
    blue white yellow black similar close far great nice""".split()
)

_CLOSED: tuple[tuple[frozenset[str], str], ...] = (
    (PRONOUNS, "O"),
    (DETERMINERS, "D"),
    (PREPOSITIONS, "P"),
    (CONJUNCTIONS, "&"),
    (MODALS_AUX, "V"),
)
# Open-class word lists; place names take priority over these.
_COMMON: tuple[tuple[frozenset[str], str], ...] = (
    (INTERJECTIONS, "!"),
    (COMMON_VERBS, "V"),
    (ADVERBS, "R"),
    (ADJECTIVES, "A"),
)


@dataclass(frozen=True)
class Token:
    surface: str
    norm: str
    tag: str | None = None

    @classmethod
    def of(cls, surface: str, tag: str | None = None) -> "Token":
        return cls(surface, surface.casefold(), tag)


def _is_punct(s: str) -> bool:
    return bool(s) and all(
        unicodedata.category(ch)[0] in "PS" for ch in s
    )


def tokenize(text: str) -> list[Token]:
    """Whitespace tokenizer that peels punctuation runs off word edges.

    URLs, emoticons and apostrophe contractions stay whole.
    """
    out: list[Token] = []
    for chunk in text.split():
        if chunk in EMOTICONS:
            out.append(Token.of(chunk))
            continue
        if URL_TOKEN_RE.match(chunk):
            url = chunk.rstrip(".,!?;:)'\"")
            out.append(Token.of(url))
            if len(url) < len(chunk):
                out.append(Token.of(chunk[len(url):]))
            continue
        lead, core, trail = _EDGE_RE.match(chunk).groups()
        if not core:
            # chunk is entirely non-word characters
            out.append(Token.of(chunk))
            continue
        if lead:
            out.append(Token.of(lead))
        out.append(Token.of(core))
        if trail:
            out.append(Token.of(trail))
    return out


def pos_tag(tokens: Sequence[Token], gazetteer: "Lexicon | None" = None) -> list[Token]:
    """Deterministic rule tagger; returns new tokens with ``tag`` set."""
    place_positions: set[int] = set()
    if gazetteer is not None:
        _, spans = lexicon_hits(tokens, gazetteer)
        for start, end in spans:
            place_positions.update(range(start, end))
    tagged = []
    for i, tok in enumerate(tokens):
        tagged.append(Token(tok.surface, tok.norm, _tag_one(i, tok, place_positions)))
    return tagged


def _tag_one(i: int, tok: Token, places: set[int]) -> str:
    s, n = tok.surface, tok.norm
    if URL_TOKEN_RE.match(s):
        return "U"
    if s in EMOTICONS:
        return "E"
    if _is_punct(s):
        return ","
    if NUMERAL_RE.match(s):
        return "$"
    for words, tag in _CLOSED:
        if n in words:
            return tag
    if i in places:
        return "^"
    for words, tag in _COMMON:
        if n in words:
            return tag
    if i > 0 and s[:1].isupper():
        return "^"
    if n.endswith("ly"):
        return "R"
    if n.endswith("ing") or n.endswith("ed"):
        return "V"
    if n.endswith(("ous", "ful", "ish")):
        return "A"
    if not any(ch.isalpha() for ch in s):
        return "G"
    return "N"


# -- lexicons ----------------------------------------------------------------

POSITIONS = ("ANY", "INITIAL")


@dataclass(frozen=True)
class LexEntry:
    words: tuple[str, ...]
    weight: float = 1.0
    position: str = "ANY"


@dataclass
class Lexicon:
    name: str
    entries: dict[tuple[str, ...], LexEntry]
    checksum: str = ""
    _by_first: dict[str, list[tuple[str, ...]]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError(f"lexicon {self.name!r} is empty")
        index: dict[str, list[tuple[str, ...]]] = {}
        for key in self.entries:
            index.setdefault(key[0], []).append(key)
        for keys in index.values():
            keys.sort(key=lambda k: (-len(k), k))
        self._by_first = index

    @classmethod
    def from_terms(cls, name: str, terms: Iterable[str], position: str = "ANY") -> "Lexicon":
        entries = {}
        for t in terms:
            words = tuple(t.casefold().split())
            if words:
                entries[words] = LexEntry(words, 1.0, position)
        return cls(name, entries)

    def __contains__(self, term: str) -> bool:
        return tuple(term.casefold().split()) in self.entries

    def terms(self) -> list[str]:
        return sorted(" ".join(k) for k in self.entries)

    def longest_match(self, norms: Sequence[str], i: int) -> tuple[str, ...] | None:
        for key in self._by_first.get(norms[i], ()):
            if tuple(norms[i:i + len(key)]) == key:
                return key
        return None


def parse_lexicon(name: str, text: str) -> Lexicon:
    """Parse ``term[TAB]weight?[TAB]position?`` lines; ``#`` starts a comment."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        words = tuple(parts[0].casefold().split())
        weight = float(parts[1]) if len(parts) > 1 and parts[1].strip() else 1.0
        position = parts[2].strip().upper() if len(parts) > 2 and parts[2].strip() else "ANY"
        if position not in POSITIONS:
            raise ValueError(f"{name}:{lineno}: bad position {position!r}")
        entries[words] = LexEntry(words, weight, position)
    lex = Lexicon(name, entries)
    lex.checksum = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return lex


def lexicon_hits(tokens: Sequence[Token], lexicon: Lexicon) -> tuple[int, list[tuple[int, int]]]:
    """Greedy non-overlapping longest matches; returns (count, [(start, end)])."""
    norms = [t.norm for t in tokens]
    spans = []
    i = 0
    while i < len(norms):
        key = lexicon.longest_match(norms, i)
        if key is None:
            i += 1
        else:
            spans.append((i, i + len(key)))
            i += len(key)
    return len(spans), spans


# -- concreteness ------------------------------------------------------------


@dataclass
class ConcretenessTable:
    ratings: dict[tuple[str, ...], float]
    checksum: str = ""

    def get(self, *words: str) -> float | None:
        return self.ratings.get(tuple(words))


def parse_concreteness(text: str) -> ConcretenessTable:
    """TSV of ``term<TAB>raw`` with raw ratings on the 1..5 scale, stored as (raw-1)/4."""
    ratings = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        term, raw = line.split("\t")[:2]
        r = float(raw)
        if not 1.0 <= r <= 5.0:
            raise ValueError(f"concreteness:{lineno}: rating {r} outside 1..5")
        ratings[tuple(term.casefold().split())] = (r - 1.0) / 4.0
    return ConcretenessTable(ratings, hashlib.sha256(text.encode("utf-8")).hexdigest())


def concreteness_ratings(tokens: Sequence[Token], table: ConcretenessTable) -> list[float]:
    """Ratings of covered content tokens; bigram entries win over unigrams."""
    out = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.tag not in CONTENT_TAGS:
            i += 1
            continue
        if i + 1 < len(tokens) and tokens[i + 1].tag in CONTENT_TAGS:
            r = table.get(tok.norm, tokens[i + 1].norm)
            if r is not None:
                out.append(r)
                i += 2
                continue
        r = table.get(tok.norm)
        if r is not None:
            out.append(r)
        i += 1
    return out


def mean_concreteness(tokens: Sequence[Token], table: ConcretenessTable) -> float | None:
    ratings = concreteness_ratings(tokens, table)
    return sum(ratings) / len(ratings) if ratings else None


# -- stance ------------------------------------------------------------------

AGREE, DISAGREE, NONE = "AGREE", "DISAGREE", "NONE"


def _fires(tokens: Sequence[Token], lexicon: Lexicon) -> bool:
    first = next((i for i, t in enumerate(tokens) if t.tag != "," and not _is_punct(t.surface)), None)
    _, spans = lexicon_hits(tokens, lexicon)
    for start, end in spans:
        entry = lexicon.entries[tuple(t.norm for t in tokens[start:end])]
        if entry.position == "ANY" or start == first:
            return True
    return False


def detect_stance(tokens: Sequence[Token], agree: Lexicon, disagree: Lexicon) -> str:
    """AGREE, DISAGREE or NONE; agreement is checked first."""
    if _fires(tokens, agree):
        return AGREE
    if _fires(tokens, disagree):
        return DISAGREE
    return NONE


# -- resource bundle ---------------------------------------------------------

LEXICON_FILES = {
    "stopwords": "stopwords.txt",
    "hedges": "hedges.txt",
    "certainty": "certainty.txt",
    "agree": "agree.txt",
    "disagree": "disagree.txt",
    "pron_1sg": "pron_1sg.txt",
    "pron_1pl": "pron_1pl.txt",
    "pron_2": "pron_2.txt",
    "places": "places.txt",
    "geo_terms": "geo_terms.txt",
    "interface": "interface.txt",
}
CONCRETENESS_FILE = "concreteness.tsv"


@dataclass
class Resources:
    lexicons: dict[str, Lexicon]
    concreteness: ConcretenessTable
    geo: Lexicon

    def __getattr__(self, name: str) -> Lexicon:
        try:
            return self.__dict__["lexicons"][name]
        except KeyError:
            raise AttributeError(name) from None

    def checksums(self) -> dict[str, str]:
        out = {name: lex.checksum for name, lex in sorted(self.lexicons.items())}
        out["concreteness"] = self.concreteness.checksum
        return out

    def tag(self, text: str, gold: Sequence[str] | None = None) -> list[Token]:
        tokens = tokenize(text)
        if gold is not None:
            if len(gold) == len(tokens) and all(t in TAGS for t in gold):
                return [Token(t.surface, t.norm, g) for t, g in zip(tokens, gold)]
            log.warning("gold tags do not align with tokens; using rule tagger")
        return pos_tag(tokens, self.lexicons["places"])


def _read(directory: Path | None, filename: str) -> str:
    if directory is not None:
        return (Path(directory) / filename).read_text(encoding="utf-8")
    return importlib_resources.files("constructive.data").joinpath(filename).read_text(encoding="utf-8")


_DEFAULT: Resources | None = None


def load_resources(directory: str | Path | None = None) -> Resources:
    """Load lexicons and the concreteness table (shipped copies when ``directory`` is None)."""
    global _DEFAULT
    if directory is None and _DEFAULT is not None:
        return _DEFAULT
    d = Path(directory) if directory is not None else None
    lexicons = {name: parse_lexicon(name, _read(d, fn)) for name, fn in LEXICON_FILES.items()}
    geo_entries = {**lexicons["geo_terms"].entries, **lexicons["places"].entries}
    geo = Lexicon("geo", geo_entries)
    geo.checksum = hashlib.sha256(
        (lexicons["places"].checksum + lexicons["geo_terms"].checksum).encode()
    ).hexdigest()
    res = Resources(lexicons, parse_concreteness(_read(d, CONCRETENESS_FILE)), geo)
    if directory is None:
        _DEFAULT = res
    return res

import itertools
import random

import pytest
from hypothesis import given, strategies as st

from constructive.corpus import ChatMessage, LatLon, MarkerMove, SoloGuess, Utterance, derive_utterances
from constructive.dynamics import (
    CONTENT,
    POS_BIGRAM,
    STOPWORD,
    balance_entropy,
    confidence_feature,
    guess_dynamics,
    matching,
    participation_indicators,
    stance_features,
)
from constructive.errors import PipelineError
from constructive.geo import arc_distance, destination

from conftest import make_game
from oracles import entropy_mp


def test_entropy_examples():
    assert balance_entropy([3, 3]) == 1.0
    assert balance_entropy([4, 4, 4]) == 1.0
    assert balance_entropy([5, 0]) == 0.0
    assert balance_entropy([0, 0, 0]) == 0.0
    assert balance_entropy([2, 1, 1]) == pytest.approx(entropy_mp([2, 1, 1]), abs=1e-12)
    assert balance_entropy([2, 1, 1]) == pytest.approx(0.9464, abs=1e-4)
    with pytest.raises(PipelineError):
        balance_entropy([1])


vectors = st.lists(st.integers(0, 50), min_size=2, max_size=6).filter(lambda v: sum(v) > 0)


@given(vectors, st.sampled_from([2, 3, 7, 0.5]), st.randoms())
def test_entropy_invariances(v, c, rnd):
    base = balance_entropy(v)
    assert 0.0 <= base <= 1.0
    assert balance_entropy([x * c for x in v]) == pytest.approx(base, abs=1e-12)
    shuffled = list(v)
    rnd.shuffle(shuffled)
    assert balance_entropy(shuffled) == pytest.approx(base, abs=1e-12)


def _conv(resources, lines):
    msgs = [ChatMessage(p, float(i), text) for i, (p, text) in enumerate(lines)]
    utts = derive_utterances(msgs)
    return utts, [resources.tag(u.text) for u in utts]


def test_matching_single_turn(resources):
    utts, toks = _conv(resources, [("A", "the a"), ("B", "the")])
    assert matching(utts, toks, STOPWORD, resources.stopwords) == (0.5, 0.5)


def test_matching_micro_average(resources):
    # turn 1: {the, a, of} -> reply repeats {the}; turn 2: {the, it} -> both repeated
    utts, toks = _conv(resources, [("A", "the a of"), ("B", "the it"), ("A", "it the")])
    overall, _ = matching(utts, toks, STOPWORD, resources.stopwords)
    assert overall == pytest.approx(3 / 5)


def test_matching_no_turns(resources):
    utts, toks = _conv(resources, [("A", "hello")])
    with pytest.raises(PipelineError):
        matching(utts, toks, STOPWORD, resources.stopwords)


def test_max_pair(resources):
    lines = [("A", "the a"), ("B", "the a"), ("C", "china"), ("A", "the")]
    utts, toks = _conv(resources, lines)
    overall, best = matching(utts, toks, STOPWORD, resources.stopwords)
    assert best == 1.0 and overall == pytest.approx(2 / 4)
    # B->C repeats nothing; C's message has no stopwords so C->A is skipped
    utts2, toks2 = _conv(resources, lines[:2])
    assert matching(utts2, toks2, STOPWORD, resources.stopwords)[1] == matching(utts2, toks2, STOPWORD, resources.stopwords)[0]


WORDS = "the a of it is in china maybe flag road i think yes buildings look red".split()


def random_conversation(rng, n_players=3):
    players = "ABC"[:n_players]
    return [(rng.choice(players), " ".join(rng.choices(WORDS, k=rng.randint(1, 6))))
            for _ in range(rng.randint(2, 12))]


def test_matching_bounds_and_echo(resources):
    rng = random.Random(5)
    for _ in range(200):
        utts, toks = _conv(resources, random_conversation(rng))
        for cls in (STOPWORD, CONTENT, POS_BIGRAM):
            try:
                o, m = matching(utts, toks, cls, resources.stopwords)
            except PipelineError:
                continue
            assert 0.0 <= o <= 1.0 and 0.0 <= m <= 1.0
    echo = [("A", "the buildings look chinese maybe"), ("B", "the buildings look chinese maybe"),
            ("A", "the buildings look chinese maybe")]
    utts, toks = _conv(resources, echo)
    for cls in (STOPWORD, CONTENT, POS_BIGRAM):
        assert matching(utts, toks, cls, resources.stopwords)[0] == 1.0


def test_participation(resources):
    g = make_game(moves=[("A", 3.0, (1, 1))])
    toks = [resources.tag(m.text) for m in g.messages]
    f = participation_indicators(g, toks)
    assert (f["dyn.all_chat"], f["dyn.all_move"], f["dyn.two_plus_move"]) == (1.0, 0.0, 0.0)
    g3 = make_game(
        players=("A", "B", "C"),
        messages=[(p, float(i), "hi") for i, p in enumerate("ABC" * 4)],
        moves=[("A", 20.0, (1, 1)), ("A", 21.0, (1, 1)), ("B", 22.0, (1, 1)), ("C", 23.0, (1, 1))],
    )
    f3 = participation_indicators(g3, [resources.tag(m.text) for m in g3.messages])
    assert f3["dyn.entropy_msgs"] == 1.0
    assert f3["dyn.entropy_moves"] == pytest.approx(0.9464, abs=1e-4)


def test_stance_features(resources):
    fig2 = ["sure, shanghai", "buildings look chinese", "yeah agreed", "the road signs are red"]
    f = stance_features([resources.tag(t) for t in fig2], resources)
    assert (f["dyn.agree_count"], f["dyn.disagree_count"]) == (2.0, 0.0)
    assert f["dyn.agree_frac"] == 0.5
    assert stance_features([], resources)["dyn.agree_count"] == 0.0
    mid = stance_features([resources.tag("are you sure")], resources)
    assert (mid["dyn.agree_count"], mid["dyn.disagree_count"]) == (0.0, 0.0)


def test_guess_dynamics():
    same = [MarkerMove(p, float(i), LatLon(3, 3)) for i, p in enumerate("ABA")]
    assert guess_dynamics(same) == {"dyn.median_jump": 0.0, "dyn.median_cross_jump": 0.0}
    start = LatLon(0, 0)
    g = 250.0
    pts = [start, destination(start, 90, g), destination(start, 90, 2 * g)]
    moves = [MarkerMove(p, float(i), loc) for i, (p, loc) in enumerate(zip("ABA", pts))]
    out = guess_dynamics(moves)
    assert out["dyn.median_jump"] == pytest.approx(g, abs=1e-6)
    assert out["dyn.median_cross_jump"] == pytest.approx(g, abs=1e-6)
    assert guess_dynamics(moves[:1]) == {"dyn.median_jump": None, "dyn.median_cross_jump": None}
    one_player = [MarkerMove("A", float(i), loc) for i, loc in enumerate(pts)]
    assert guess_dynamics(one_player)["dyn.median_cross_jump"] is None


def test_confidence():
    assert confidence_feature([SoloGuess("a", LatLon(0, 0), 0.2), SoloGuess("b", LatLon(0, 0), 0.8)]) == 0.5
    assert confidence_feature([SoloGuess("a", LatLon(0, 0), 1.0)]) == 1.0
    assert confidence_feature([]) is None

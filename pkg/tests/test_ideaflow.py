import random

from constructive.ideaflow import extract_ideas, idea_features, is_unanimous
from constructive.synth import generate_corpus

from oracles import brute_ideas

FIXTURE = [("A", "buildings look chinese"), ("B", "yeah those buildings, maybe shanghai"), ("A", "shanghai works")]


def run(resources, lines):
    speakers = [p for p, _ in lines]
    toks = [resources.tag(t) for _, t in lines]
    return extract_ideas(speakers, toks, resources.stopwords, resources.hedges)


def test_three_message_fixture(resources):
    ideas = {e.term: e for e in run(resources, FIXTURE)}
    assert set(ideas) == {"buildings", "shanghai"}
    b, s = ideas["buildings"], ideas["shanghai"]
    assert (b.introducer, b.intro_hedged, b.adopters()) == ("A", False, ["B"])
    assert b.adoptions[0].hedged
    assert (s.introducer, s.intro_hedged, s.adopters()) == ("B", True, ["A"])
    assert not s.adoptions[0].hedged
    f = idea_features(list(ideas.values()), ["A", "B"])
    assert f["ideas.count"] == 2.0
    assert f["ideas.unanimous_count"] == 2.0
    assert f["ideas.intro_entropy"] == 1.0
    assert f["ideas.intro_hedged_frac"] == 0.5 and f["ideas.adopt_hedged_frac"] == 0.5


def test_self_repeat_is_not_an_idea(resources):
    assert run(resources, [("A", "flag flag"), ("A", "the flag"), ("B", "hmm")]) == []


def test_unanimous_three_players(resources):
    ideas = run(resources, [("A", "red flag"), ("B", "that flag"), ("C", "flag yes")])
    flag = [e for e in ideas if e.term == "flag"][0]
    assert len(flag.adoptions) == 2 and is_unanimous(flag, ["A", "B", "C"])
    assert not is_unanimous(flag, ["A", "B", "C", "D"])


def test_no_ideas_features():
    f = idea_features([], ["A", "B"])
    assert all(v == 0.0 for v in f.values())


def test_matches_brute_force_on_synthetic_games(resources):
    for g in generate_corpus(200, seed=11):
        speakers = [m.player for m in g.messages]
        toks = [resources.tag(m.text) for m in g.messages]
        fast = extract_ideas(speakers, toks, resources.stopwords, resources.hedges)
        got = {
            e.term: (e.introducer, e.intro_msg_index, e.intro_hedged,
                     tuple((a.player, a.msg_index, a.hedged) for a in e.adoptions))
            for e in fast
        }
        assert got == brute_ideas(speakers, toks, resources.stopwords, resources.hedges)
        for e in fast:
            users = {speakers[i] for i, t in enumerate(toks) if any(x.norm == e.term for x in t)}
            assert len(users) >= 2

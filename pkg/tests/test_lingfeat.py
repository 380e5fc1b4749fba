from collections import Counter
from dataclasses import replace

import pytest

from constructive.errors import PipelineError
from constructive.lingfeat import (
    GROUP_OF,
    GROUPS,
    SCALAR_NAMES,
    GameText,
    PosVocabulary,
    analyze_text,
    baseline_features,
    early_window,
    featurize_game,
    fit_pos_vocabulary,
    length_features,
    lexicon_features,
    pos_ngram_counts,
    pos_ngram_features,
)
from constructive.text import Lexicon, Token

from conftest import T0, make_game


def test_registry_shape():
    assert len(SCALAR_NAMES) == len(set(SCALAR_NAMES))
    assert set(GROUP_OF.values()) <= set(GROUPS)
    assert all(n.split(".")[0] in {"base", "ideas", "dyn", "lng"} for n in SCALAR_NAMES)


def test_length_features(resources):
    g = make_game(messages=[("A", 0.0, "one two three"), ("B", 4.0, "a b c d e"), ("A", 10.0, "x")])
    f = length_features(g, analyze_text(g, resources))
    assert f["lng.mean_turn_gap_s"] == 5.0 and f["lng.num_turns"] == 2.0
    two = make_game(messages=[("A", 0.0, "one two three"), ("B", 4.0, "four five six seven eight")])
    f2 = length_features(two, analyze_text(two, resources))
    assert f2["lng.words_per_msg"] == 4.0 and f2["lng.ttr"] == 1.0


def test_lexicon_features(resources):
    g = make_game(messages=[("A", 0.0, "china is in asia"), ("B", 1.0, "i you we")])
    gt = analyze_text(g, resources)
    one = GameText(gt.message_tokens[:1], gt.utterances[:1], gt.utterance_tokens[:1], [])
    geo = Lexicon.from_terms("geo", ["china", "asia"])
    res = type(resources)(dict(resources.lexicons), resources.concreteness, geo)
    f = lexicon_features(one, res)
    assert f["lng.geo_frac"] == pytest.approx(2 / 4)
    assert f["lng.hedge_frac"] == 0.0
    pron = GameText(gt.message_tokens[1:], gt.utterances[1:], gt.utterance_tokens[1:], [])
    p = lexicon_features(pron, resources)
    assert p["lng.pron_1sg_frac"] + p["lng.pron_1pl_frac"] + p["lng.pron_2_frac"] == pytest.approx(1.0)


def test_pos_ngrams(resources):
    toks = [[Token("china", "china", "^"), Token(",", ",", ",")]]
    gt = GameText(toks, [], [], [])
    counts = pos_ngram_counts(gt, 2)
    assert counts[("^", ",")] == 1 and counts[("#", "^")] == 1 and counts[("^",)] == 1
    assert pos_ngram_features(counts, PosVocabulary(2, 1, ())) == {}
    vocab = fit_pos_vocabulary([counts], 2, 1)
    feats = pos_ngram_features(counts, vocab)
    totals = Counter()
    for g, k in counts.items():
        totals[len(g)] += k
    assert feats == {"pos." + " ".join(g): counts[g] / totals[len(g)] for g in counts}


def test_vocab_min_df_and_order():
    c1 = Counter({("N",): 2, ("N", "V"): 1, ("N", "V", "N"): 1})
    c2 = Counter({("N",): 1, ("V", "N"): 1})
    v = fit_pos_vocabulary([c1, c2], 2, 2)
    assert v.grams == (("N",),)
    v = fit_pos_vocabulary([c1, c2], 2, 1)
    assert all(len(g) <= 2 for g in v.grams)
    assert PosVocabulary.from_dict(v.to_dict()) == v


def test_baseline():
    g = make_game(messages=[("A" if i % 2 else "B", 0.0 + i, "hi") for i in range(6)], duration=90.0)
    g = replace(g, submitted_at=g.messages[0].timestamp + 90.0)
    assert baseline_features(g) == {"base.team_size": 2.0, "base.msgs_per_player": 3.0, "base.duration_s": 90.0}
    empty = make_game(messages=())
    assert baseline_features(empty)["base.msgs_per_player"] == 0.0
    instant = make_game(duration=0.0, messages=())
    assert baseline_features(instant)["base.duration_s"] == 0.0


def _timed(offsets):
    return make_game(messages=[("A" if i % 2 else "B", t, f"m{i}") for i, t in enumerate(offsets)], duration=100.0)


def test_early_window_rules():
    w = early_window(_timed([0, 5, 30, 60]))
    assert w.coverage_fraction == 0.5 and w.eligible and len(w.game.messages) == 2
    assert w.game.submitted_at == T0 + 20.0
    w = early_window(_timed([0, 2, 3, 50]))
    assert w.coverage_fraction == 0.75 and w.eligible
    w = early_window(_timed([0, 5, 10]))
    assert w.coverage_fraction == 1.0 and not w.eligible
    # exactly at the horizon is outside the window
    assert len(early_window(_timed([0, 20])).game.messages) == 1
    with pytest.raises(PipelineError):
        early_window(make_game(messages=()))


def test_early_window_anchor_uses_first_move():
    g = make_game(messages=[("A", 15.0, "a"), ("B", 30.0, "b")], moves=[("A", 5.0, (1, 1))])
    w = early_window(g)
    assert len(w.game.messages) == 1 and len(w.game.marker_moves) == 1


def test_early_window_subset():
    g = _timed([0, 3, 8, 19, 25, 40])
    w = early_window(g)
    assert set(w.game.messages) <= set(g.messages)
    assert w.game.solo_guesses == g.solo_guesses


def test_featurize_masks_and_determinism(resources):
    g = make_game(messages=[("A", 0.0, "maybe china"), ("B", 3.0, "sure")])
    fv = featurize_game(g, resources)
    d = fv.as_dict()
    assert d["dyn.median_jump"] is None and d["dyn.median_cross_jump"] is None
    assert fv.mask[fv.names.index("dyn.median_jump")]
    again = featurize_game(g, resources)
    assert fv.values == again.values and fv.mask == again.mask
    vocab = fit_pos_vocabulary([fv.pos_counts], 2, 1)
    with_pos = featurize_game(g, resources, vocab)
    assert len(with_pos.names) == len(SCALAR_NAMES) + len(vocab.grams)
    assert with_pos.groups[-1] == "pos"

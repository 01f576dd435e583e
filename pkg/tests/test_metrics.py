import itertools
import math

import pytest
from hypothesis import given, strategies as st

from oracles import edit_distance, gleu_oracle
from wikigec.metrics import (
    Edit,
    MetricReport,
    apply_edits,
    corpus_gleu,
    evaluate_m2,
    extract_edits,
    f_beta,
    gleu,
    gleu_stats,
    read_m2,
    score_edits,
)

tokens = st.lists(st.sampled_from(list("abcde")), max_size=12)

# frozen from the counting oracle before the implementation existed
TOY_SOURCE, TOY_REF, TOY_HYP = "w x q z".split(), "w x y z".split(), "w x y z q z".split()
TOY_GLEU = 0.4272870063962341


def test_identical_has_no_edits():
    assert extract_edits("a b c".split(), "a b c".split()) == []


def test_substitution_and_insertion():
    assert extract_edits("a b c".split(), "a x c".split()) == [Edit(1, 2, ("x",))]
    assert extract_edits("a c".split(), "a b c".split()) == [Edit(1, 1, ("b",))]


def test_deletion_and_merged_run():
    assert extract_edits("a b c".split(), "a c".split()) == [Edit(1, 2, ())]
    edits = extract_edits("a b c d".split(), "a x y d".split())
    assert edits == [Edit(1, 3, ("x", "y"))]


def test_repeated_word_gap_goes_last():
    assert extract_edits("went to to the".split(), "went to the".split()) == [Edit(2, 3, ())]
    assert extract_edits("a b".split(), "a b b".split()) == [Edit(2, 2, ("b",))]


@given(tokens, tokens)
def test_round_trip_law(src, hyp):
    edits = extract_edits(src, hyp)
    assert apply_edits(src, edits) == hyp
    for e in edits:
        assert 0 <= e.span_start <= e.span_end <= len(src)
    # edits come from a minimal alignment: no more edited tokens than the distance
    cost = sum(max(e.span_end - e.span_start, len(e.replacement)) for e in edits)
    assert cost == edit_distance(src, hyp)


def test_apply_rejects_overlap():
    with pytest.raises(ValueError):
        apply_edits("a b c".split(), [Edit(0, 2, ("x",)), Edit(1, 3, ("y",))])


def test_score_perfect_system():
    gold = [[Edit(1, 2, ("x",)), Edit(3, 3, ("y",))]]
    r = score_edits([gold[0]], [gold])
    assert (r.precision, r.recall, r.f_beta) == (1.0, 1.0, 1.0)


def test_score_half_precision():
    r = score_edits([[Edit(0, 1, ("a",)), Edit(2, 3, ("b",))]], [[[Edit(0, 1, ("a",))]]])
    assert r.precision == 0.5 and r.recall == 1.0
    assert r.f_beta == pytest.approx(1.25 * 0.5 / 1.125)
    assert round(r.f_beta, 4) == 0.5556


def test_score_degenerate_conventions():
    r = score_edits([[]], [[[Edit(0, 1, ("a",))]]])
    assert (r.precision, r.recall, r.f_beta) == (0.0, 0.0, 0.0)
    r = score_edits([[], []], [[[]], [[]]])
    assert (r.precision, r.recall, r.f_beta) == (1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        score_edits([[]], [])


def test_score_picks_best_annotator():
    sys = [[Edit(1, 2, ("had",))]]
    gold = [[[Edit(1, 2, ("has",))], [Edit(1, 2, ("had",))]]]
    r = score_edits(sys, gold)
    assert r.matched == 1 and r.gold == 1


def test_report_scaling():
    d = MetricReport(0.5, 0.25, f_beta(0.5, 0.25), gleu=0.4).as_dict()
    assert d["precision"] == 50.0 and d["recall"] == 25.0 and d["gleu"] == 40.0


def test_f_beta_examples():
    assert f_beta(35.7, 51.3, 0.5) == pytest.approx(38.0, abs=0.05)
    assert abs(f_beta(35.7, 51.3, 0.5) - 38.1) <= 0.2
    assert abs(f_beta(33.6, 21.9, 0.5) - 30.3) <= 0.2
    assert f_beta(0, 0, 0.5) == 0.0


@given(st.floats(0.1, 100), st.floats(0.1, 5))
def test_f_beta_equal_inputs(x, beta):
    assert f_beta(x, x, beta) == pytest.approx(x)


@given(st.floats(0, 100), st.floats(0, 100), st.floats(0, 100))
def test_f_beta_monotone(p, r, delta):
    assert f_beta(min(p + delta, 100), r) >= f_beta(p, r) - 1e-12
    assert f_beta(p, min(r + delta, 100)) >= f_beta(p, r) - 1e-12


def test_f_beta_weights_precision():
    assert f_beta(80, 20, 0.5) > f_beta(20, 80, 0.5)


def test_f_beta_matches_formula():
    p, r, b = 62.1, 40.0, 0.5
    assert f_beta(p, r, b) == pytest.approx((1 + b * b) * p * r / (b * b * p + r))


def test_gleu_trivial_cases():
    s = "the cat sat".split()
    assert gleu(s, s, [s]) == 1.0
    assert gleu(s, "the cat sits".split(), ["the cat sits".split()]) == 1.0
    assert gleu(s, [], [s]) == 0.0
    with pytest.raises(ValueError):
        gleu(s, s, [])


def test_gleu_toy_golden():
    assert gleu_oracle(TOY_SOURCE, TOY_HYP, TOY_REF) == pytest.approx(TOY_GLEU, abs=1e-12)
    assert gleu(TOY_SOURCE, TOY_HYP, [TOY_REF]) == pytest.approx(TOY_GLEU, abs=1e-9)


@given(tokens, tokens, tokens)
def test_gleu_single_reference_matches_oracle(src, hyp, ref):
    assert gleu(src, hyp, [ref]) == pytest.approx(gleu_oracle(src, hyp, ref), abs=1e-12)


@given(st.lists(st.sampled_from(list("abcde")), min_size=1, max_size=15), tokens)
def test_gleu_reference_is_perfect(ref, src):
    assert gleu(src, ref, [ref]) == 1.0


@given(tokens, tokens, st.lists(tokens, min_size=1, max_size=4), st.randoms())
def test_gleu_reference_permutation(src, hyp, refs, rnd):
    shuffled = list(refs)
    rnd.shuffle(shuffled)
    assert gleu(src, hyp, refs) == pytest.approx(gleu(src, hyp, shuffled), abs=1e-12)
    assert 0.0 <= gleu(src, hyp, refs) <= 1.0


def test_gleu_stats_shape_and_corpus_of_one():
    stats = gleu_stats(TOY_SOURCE, TOY_HYP, [TOY_REF])
    assert len(stats) == 2 + 3 * 4
    assert corpus_gleu([TOY_SOURCE], [TOY_HYP], [[TOY_REF]]) == pytest.approx(TOY_GLEU)
    with pytest.raises(ValueError):
        corpus_gleu([TOY_SOURCE], [], [])


def test_penalty_lowers_score():
    src, ref = "a b c d".split(), "a x c d".split()
    kept_error = gleu(src, src, [ref])
    assert kept_error < gleu(src, ref, [ref])


def test_read_m2(fixtures):
    with open(fixtures / "dev.m2") as fh:
        sents = read_m2(fh)
    assert len(sents) == 4
    assert sents[0].source == "He have finished the work .".split()
    assert sents[0].gold_lists() == [[Edit(1, 2, ("has",))], [Edit(1, 2, ("had",))]]
    assert sents[1].gold_lists() == [[Edit(1, 2, ("received",)), Edit(2, 3, ("the",))]]
    assert sents[2].gold_lists() == [[]]
    assert sents[3].gold_lists() == [[Edit(3, 4, ())]]


def test_evaluate_m2(fixtures):
    with open(fixtures / "dev.m2") as fh:
        gold = read_m2(fh)
    hyps = [
        "He had finished the work .".split(),
        "I received teh letter .".split(),
        "The cat sat on a mat .".split(),
        "We went to the park .".split(),
    ]
    r = evaluate_m2(hyps, gold)
    # matches: had, received, the deletion; proposals add "a mat"
    assert (r.matched, r.proposed, r.gold) == (3, 4, 4)
    assert r.precision == 0.75 and r.recall == 0.75
    with pytest.raises(ValueError):
        evaluate_m2(hyps[:2], gold)


def test_evaluate_m2_identity_system(fixtures):
    with open(fixtures / "dev.m2") as fh:
        gold = read_m2(fh)
    r = evaluate_m2([g.source for g in gold], gold)
    assert r.proposed == 0 and r.precision == 0.0 and r.recall == 0.0


def test_extract_edits_brute_force_minimal():
    # every pair over a tiny alphabet: edit count never exceeds the brute-force distance
    for n, m in itertools.product(range(4), range(4)):
        for a in itertools.product("ab", repeat=n):
            for b in itertools.product("ab", repeat=m):
                edits = extract_edits(list(a), list(b))
                assert apply_edits(list(a), edits) == list(b)
                assert len(edits) <= edit_distance(a, b)
                assert (len(edits) == 0) == (a == b)


def test_gleu_bounds_on_nan_free_inputs():
    s = "a".split()
    assert math.isfinite(gleu(s, "b".split(), [s]))

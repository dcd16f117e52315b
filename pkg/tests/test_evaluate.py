from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import conllu
from udseg.conllu import Document, build_sentence, parse_document
from udseg.evaluate import (
    EvalResult,
    EvaluationError,
    acc_mfs,
    corpus_prf,
    format_report,
    lcs_match,
    macro_f1,
    mwt_correctness,
    prf,
    string_f,
)


def doc(*word_lists):
    sents = []
    for words in word_lists:
        pieces, pos = [], 0
        for w in words:
            pieces.append((pos, pos + len(w), w, (w,)))
            pos += len(w) + 1
        sents.append(build_sentence(" ".join(words), pieces))
    return Document(tuple(sents))


class TestLCS:
    def test_cases(self):
        assert lcs_match(list("abc"), list("abc")) == 3
        assert lcs_match(["a", "b", "c"], ["a", "bc"]) == 1
        assert lcs_match(["ab", "c"], ["a", "bc"]) == 0
        assert lcs_match([], ["a"]) == 0

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.sampled_from("abc"), max_size=8), st.lists(st.sampled_from("abc"), max_size=8),
           st.sampled_from(["a", "z"]))
    def test_symmetry_and_append(self, a, b, w):
        m = lcs_match(a, b)
        assert m == lcs_match(b, a)
        assert m <= min(len(a), len(b))
        assert lcs_match(a + [w], b + [w]) == m + 1


class TestPRF:
    def test_hand_case(self):
        res = prf(["a", "b", "c"], ["a", "bc"])
        assert res.fractions() == (Fraction(1, 3), Fraction(1, 2), Fraction(2, 5))
        assert res.f1 == 0.4

    def test_identity(self):
        assert prf(["x", "y"], ["x", "y"]).fractions() == (1, 1, 1)

    def test_empty_candidate(self):
        assert prf([], ["a"]).fractions() == (0, 0, 0)

    def test_empty_both(self):
        assert prf([], []).fractions() == (1, 1, 1)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.sampled_from("abcd"), max_size=8), st.lists(st.sampled_from("abcd"), max_size=8))
    def test_bounds(self, a, b):
        f = prf(a, b).fractions()[2]
        assert 0 <= f <= 1
        assert (f == 1) == (a == b)


class TestCorpus:
    def test_identity(self):
        d = doc(["a", "b"], ["c"])
        assert corpus_prf(d, d).f1 == 1.0

    def test_micro_average(self):
        # per-sentence (m, |c|, |r|) = (1, 3, 2) and (2, 2, 2)
        system = doc(["a", "x", "y"], ["c", "d"])
        gold = doc(["a", "z"], ["c", "d"])
        res = corpus_prf(system, gold)
        assert (res.matched, res.candidate_len, res.reference_len) == (3, 5, 4)
        assert res.fractions() == (Fraction(3, 5), Fraction(3, 4), Fraction(2, 3))

    def test_count_mismatch(self):
        with pytest.raises(EvaluationError, match="mismatch"):
            corpus_prf(doc(["a"]), doc(["a"], ["b"]))

    def test_empty_corpus(self):
        res = corpus_prf(Document(), Document())
        assert res.empty and res.f1 == 1.0

    def test_macro(self):
        assert macro_f1([EvalResult(1, 1, 1), EvalResult(0, 1, 1)]) == 0.5
        assert macro_f1([]) == 0.0

    def test_report(self):
        lines = format_report([("x", EvalResult(1, 3, 2))]).splitlines()
        assert lines[0].split("\t") == ["dataset", "precision", "recall", "f1", "matched", "cand", "ref"]
        assert lines[1].split("\t")[1:4] == ["0.333333", "0.500000", "0.400000"]


class TestTransducerMetrics:
    def test_exact(self):
        assert acc_mfs([("de", "le")], [("de", "le")]) == (1.0, 1.0)

    def test_char_f(self):
        assert string_f("abc", "abd") == pytest.approx(2 / 3)

    def test_half(self):
        acc, mfs = acc_mfs([("ab",), ("xy",)], [("ab",), ("cd",)])
        assert acc == 0.5 and mfs == 0.5

    def test_length_mismatch(self):
        with pytest.raises(EvaluationError):
            acc_mfs([("a",)], [])


class TestMWTCorrectness:
    GOLD = conllu([("1-2", "du"), ("1", "de"), ("2", "le"), ("3", "x"), ("4-5", "au"), ("4", "à"), ("5", "le")])

    def test_counts(self):
        gold = parse_document(self.GOLD)
        sys_ok = parse_document(conllu([("1-2", "du"), ("1", "de"), ("2", "le"), ("3", "x"), ("4", "au")]))
        assert mwt_correctness(sys_ok, gold) == (1, 2)
        assert mwt_correctness(sys_ok, gold, seen={"du"}) == (1, 1)
        assert mwt_correctness(gold, gold) == (2, 2)

    def test_span_must_match(self):
        gold = parse_document(conllu([("1-2", "du"), ("1", "de"), ("2", "le"), ("3", "du", "SpaceAfter=No")]))
        # system transduces the second "du" instead of the first
        system = parse_document(conllu([("1", "du"), ("2-3", "du", "SpaceAfter=No"), ("2", "de"), ("3", "le")]))
        assert mwt_correctness(system, gold) == (0, 1)

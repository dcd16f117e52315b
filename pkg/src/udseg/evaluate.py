"""Word-level precision/recall/F1 over LCS-aligned word sequences, plus ACC/MFS."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .conllu import reconstruct_text

SEPARATOR = "\x1f"


class EvaluationError(ValueError):
    pass


def lcs_length(a, b):
    """Classic O(|a||b|) dynamic program over sequences (words or characters)."""
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def lcs_match(candidate, reference):
    return lcs_length(list(candidate), list(reference))


@dataclass(frozen=True)
class EvalResult:
    matched: int
    candidate_len: int
    reference_len: int
    empty: bool = False

    def fractions(self):
        """Exact (precision, recall, f1)."""
        m, c, r = self.matched, self.candidate_len, self.reference_len
        if c == 0 and r == 0:
            return Fraction(1), Fraction(1), Fraction(1)
        p = Fraction(m, c) if c else Fraction(0)
        rec = Fraction(m, r) if r else Fraction(0)
        f = 2 * p * rec / (p + rec) if p + rec else Fraction(0)
        return p, rec, f

    @property
    def precision(self):
        return float(self.fractions()[0])

    @property
    def recall(self):
        return float(self.fractions()[1])

    @property
    def f1(self):
        return float(self.fractions()[2])

    def __add__(self, other):
        return EvalResult(
            self.matched + other.matched,
            self.candidate_len + other.candidate_len,
            self.reference_len + other.reference_len,
        )


def prf(candidate, reference):
    candidate, reference = list(candidate), list(reference)
    return EvalResult(lcs_match(candidate, reference), len(candidate), len(reference))


def corpus_prf(system, gold):
    """Micro-averaged scores over aligned sentences of two documents."""
    sys_sents, gold_sents = list(system), list(gold)
    if len(sys_sents) != len(gold_sents):
        raise EvaluationError(
            f"sentence count mismatch: system has {len(sys_sents)}, gold has {len(gold_sents)}"
        )
    if not gold_sents:
        return EvalResult(0, 0, 0, empty=True)
    total = EvalResult(0, 0, 0)
    for s, g in zip(sys_sents, gold_sents):
        total = total + prf(s.words, g.words)
    return total


def macro_f1(results):
    results = list(results)
    return sum(r.f1 for r in results) / len(results) if results else 0.0


def acc_mfs(candidates, references):
    """Exact-match rate and mean character-LCS F-score over transductions.

    Each instance is a sequence of component strings; components are joined
    with a separator before the character-level comparison.
    """
    candidates, references = list(candidates), list(references)
    if len(candidates) != len(references):
        raise EvaluationError(f"{len(candidates)} candidates for {len(references)} references")
    if not references:
        return 1.0, 1.0
    exact = 0
    fscores = []
    for cand, ref in zip(candidates, references):
        cand, ref = tuple(cand), tuple(ref)
        exact += cand == ref
        fscores.append(string_f(SEPARATOR.join(cand), SEPARATOR.join(ref)))
    return exact / len(references), sum(fscores) / len(fscores)


def string_f(candidate, reference):
    if not candidate and not reference:
        return 1.0
    m = lcs_length(candidate, reference)
    if m == 0:
        return 0.0
    r, p = m / len(reference), m / len(candidate)
    return 2 * r * p / (r + p)


def format_report(rows):
    """TSV lines for (dataset, EvalResult) pairs."""
    lines = ["dataset\tprecision\trecall\tf1\tmatched\tcand\tref"]
    for name, res in rows:
        lines.append(
            f"{name}\t{res.precision:.6f}\t{res.recall:.6f}\t{res.f1:.6f}\t"
            f"{res.matched}\t{res.candidate_len}\t{res.reference_len}"
        )
    return "\n".join(lines) + "\n"


def token_offsets(sentence):
    """(start, end, token) for each token, located left to right in the raw text."""
    text = reconstruct_text(sentence)
    out, pos = [], 0
    for tok in sentence.tokens:
        start = text.find(tok.form, pos)
        if start < 0:
            continue
        out.append((start, start + len(tok.form), tok))
        pos = start + len(tok.form)
    return out


def mwt_correctness(system, gold, seen=None):
    """Share of gold non-segmental multiword tokens that the system reproduced
    with the same character span and the same component words.

    With ``seen`` (a set of surfaces) only those types are counted.  Returns
    (correct, total); total 0 means there was nothing to check.
    """
    sys_sents, gold_sents = list(system), list(gold)
    if len(sys_sents) != len(gold_sents):
        raise EvaluationError(
            f"sentence count mismatch: system has {len(sys_sents)}, gold has {len(gold_sents)}"
        )
    correct = total = 0
    for s, g in zip(sys_sents, gold_sents):
        produced = {(a, b): tok.words for a, b, tok in token_offsets(s)}
        for a, b, tok in token_offsets(g):
            if not tok.is_multiword_range or tok.is_segmental:
                continue
            if seen is not None and tok.form not in seen:
                continue
            total += 1
            correct += produced.get((a, b)) == tok.words
    return correct, total

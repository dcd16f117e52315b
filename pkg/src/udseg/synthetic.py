"""Synthetic toy languages for smoke tests and end-to-end checks."""

from __future__ import annotations

import numpy as np

from .conllu import Document, build_sentence

ALPHABET = "abcdefghijklmnopqrstuvwxyzæøåß"
HAT = "̂"


def make_lexicon(rng, size=20, alphabet=ALPHABET, min_len=2, max_len=6):
    words = set()
    while len(words) < size:
        n = int(rng.integers(min_len, max_len + 1))
        words.add("".join(rng.choice(list(alphabet), size=n)))
    return sorted(words)


def mwt_rule(x):
    """Surface 'Q' + x is transduced to the words 'q' and x + combining circumflex."""
    return "Q" + x, ("q", x + HAT)


def make_mwt_stems(rng, count=300, alphabet=ALPHABET, min_len=2, max_len=4, exclude=()):
    stems = set()
    exclude = set(exclude)
    while len(stems) < count:
        n = int(rng.integers(min_len, max_len + 1))
        s = "".join(rng.choice(list(alphabet), size=n))
        if s not in exclude:
            stems.add(s)
    return sorted(stems)


def _sentence(items):
    """items: list of (surface, words, space_after)."""
    text_parts, pieces, pos = [], [], 0
    for i, (surface, words, space) in enumerate(items):
        text_parts.append(surface)
        pieces.append((pos, pos + len(surface), surface, words))
        pos += len(surface)
        if space and i < len(items) - 1:
            text_parts.append(" ")
            pos += 1
    return build_sentence("".join(text_parts), pieces)


def unspaced_corpus(rng, lexicon, n_sentences, min_words=3, max_words=8):
    """Sentences of lexicon words written without spaces."""
    sents = []
    for _ in range(n_sentences):
        k = int(rng.integers(min_words, max_words + 1))
        words = [lexicon[int(i)] for i in rng.integers(0, len(lexicon), size=k)]
        sents.append(_sentence([(w, (w,), False) for w in words]))
    return Document(tuple(sents), "toy-unspaced")


def spaced_corpus(rng, lexicon, stems, n_sentences, min_words=3, max_words=8, mwt_rate=0.25):
    """Space-delimited sentences ending in an attached '.', with 'Q'+stem multiword tokens."""
    sents = []
    for _ in range(n_sentences):
        k = int(rng.integers(min_words, max_words + 1))
        plan = []
        for _ in range(k):
            if rng.random() < mwt_rate:
                surface, words = mwt_rule(stems[int(rng.integers(0, len(stems)))])
            else:
                w = lexicon[int(rng.integers(0, len(lexicon)))]
                surface, words = w, (w,)
            plan.append((surface, words, True))
        last = plan[-1]
        plan[-1] = (last[0], last[1], False)
        plan.append((".", (".",), False))
        sents.append(_sentence(plan))
    return Document(tuple(sents), "toy-spaced")


def toy_split(seed, spaced=False, n_train=1000, n_test=100, n_stems=300):
    """(train, test, lexicon, stems) for a toy language built from one seed."""
    rng = np.random.default_rng(seed)
    lexicon = make_lexicon(rng)
    if not spaced:
        doc = unspaced_corpus(rng, lexicon, n_train + n_test)
        stems = []
    else:
        stems = make_mwt_stems(rng, n_stems, exclude=lexicon)
        doc = spaced_corpus(rng, lexicon, stems, n_train + n_test)
    train = Document(doc.sentences[:n_train], doc.source_name + "-train")
    test = Document(doc.sentences[n_train:], doc.source_name + "-test")
    return train, test, lexicon, stems

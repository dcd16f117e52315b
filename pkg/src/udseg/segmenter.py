"""BiGRU-CRF segmentation model: n-gram unit embeddings -> BiGRU -> linear-chain CRF."""

from __future__ import annotations

import copy
import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Parameter
from .conllu import reconstruct_text
from .crf import crf_batch_nll, crf_viterbi
from .evaluate import EvalResult, prf
from .optim import Adagrad, TrainConfig, dropout, glorot_init
from .recurrent import GRU, reversal_index
from .tags import FULL_TAGSET, PLAIN_TAGSET, EncodeError, Tag, UnitMode, decode_tags, encode_tags, unitize

log = logging.getLogger(__name__)

BUCKETS = (10, 20, 40, 80, 140, 200, 300)
MAX_PIECE = 300
BOS = "\x02"
EOS = "\x03"
JOIN = "\x1f"
UNK = 0


def ngram_key(units, i, order):
    prev = units[i - 1] if i > 0 else BOS
    if order == 1:
        return units[i]
    if order == 2:
        return prev + JOIN + units[i]
    nxt = units[i + 1] if i + 1 < len(units) else EOS
    return prev + JOIN + units[i] + JOIN + nxt


@dataclass
class Vocab:
    """Per-order n-gram -> index maps; index 0 of every order is UNK."""

    maps: dict[int, dict[str, int]] = field(default_factory=dict)
    counts: dict[int, Counter] = field(default_factory=dict)

    @property
    def orders(self):
        return sorted(self.maps)

    def size(self, order):
        return len(self.maps[order]) + 1

    def lookup(self, order, key):
        return self.maps[order].get(key, UNK)

    def indices(self, units, order):
        m = self.maps[order]
        return np.array([m.get(ngram_key(units, i, order), UNK) for i in range(len(units))], dtype=np.int64)


def build_vocab(unit_sequences, uses_ngrams):
    """Count n-grams; those seen at least twice get their own index, singletons share UNK."""
    orders = (1, 2, 3) if uses_ngrams else (1,)
    counts = {o: Counter() for o in orders}
    n = 0
    for units in unit_sequences:
        units = getattr(units, "units", units)
        n += 1
        for i in range(len(units)):
            for o in orders:
                counts[o][ngram_key(units, i, o)] += 1
    if n == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    maps = {}
    for o in orders:
        kept = sorted(k for k, c in counts[o].items() if c >= 2)
        maps[o] = {k: i + 1 for i, k in enumerate(kept)}
    return Vocab(maps, counts)


@dataclass
class Example:
    units: tuple
    ids: dict  # order -> int array
    tags: np.ndarray | None


@dataclass
class Batch:
    ids: dict  # order -> (B, T) int arrays
    tags: np.ndarray  # (B, T)
    lengths: np.ndarray
    bucket: int


def bucket_for(length):
    for b in BUCKETS:
        if length <= b:
            return b
    return BUCKETS[-1]


def make_batch(examples, orders):
    T = bucket_for(max(len(e.units) for e in examples))
    B = len(examples)
    ids = {o: np.zeros((B, T), dtype=np.int64) for o in orders}
    tags = np.zeros((B, T), dtype=np.int64)
    lengths = np.zeros(B, dtype=np.int64)
    for b, e in enumerate(examples):
        n = len(e.units)
        lengths[b] = n
        for o in orders:
            ids[o][b, :n] = e.ids[o]
        if e.tags is not None:
            tags[b, :n] = e.tags
    return Batch(ids, tags, lengths, T)


def split_pieces(n, limit=MAX_PIECE):
    """Cut points for a sequence of n units: [(0, 300), (300, 600), ...]."""
    return [(s, min(s + limit, n)) for s in range(0, n, limit)]


class SegModel:
    def __init__(self, vocab, tagset, unit_mode=UnitMode.CHARACTER, uses_ngrams=False, cfg=None, rng=None):
        self.cfg = cfg or TrainConfig()
        self.vocab = vocab
        self.tagset = tuple(Tag(t) for t in tagset)
        self.unit_mode = UnitMode(unit_mode)
        self.uses_ngrams = bool(uses_ngrams)
        rng = rng if rng is not None else np.random.default_rng(self.cfg.seed)
        E, H, K = self.cfg.char_embedding_size, self.cfg.rnn_state_size, len(self.tagset)
        orders = (1, 2, 3) if self.uses_ngrams else (1,)
        self.embeddings = {o: Parameter(glorot_init((vocab.size(o), E), rng), f"emb{o}") for o in orders}
        self.fwd = GRU("gru_fw", E * len(orders), H, rng)
        self.bwd = GRU("gru_bw", E * len(orders), H, rng)
        self.W_out = Parameter(glorot_init((2 * H, K), rng), "out.W")
        self.b_out = Parameter(np.zeros(K), "out.b")
        self.transitions = Parameter(glorot_init((K + 2, K + 2), rng), "crf.transitions")

    @property
    def orders(self):
        return sorted(self.embeddings)

    def parameters(self):
        params = [self.embeddings[o] for o in self.orders]
        params += self.fwd.parameters() + self.bwd.parameters()
        params += [self.W_out, self.b_out, self.transitions]
        return params

    def tag_index(self, tag):
        return self.tagset.index(Tag(tag))

    def example(self, units, tags=None):
        ids = {o: self.vocab.indices(units, o) for o in self.orders}
        tag_ids = None if tags is None else np.array([self.tag_index(t) for t in tags], dtype=np.int64)
        return Example(tuple(units), ids, tag_ids)

    def unit_vector(self, units, i):
        """Input vector of unit i: unigram embedding, then bigram and centred trigram with n-grams on."""
        return np.concatenate(
            [self.embeddings[o].data[self.vocab.lookup(o, ngram_key(units, i, o))] for o in self.orders]
        )

    def represent(self, ids, training=False, rng=None):
        """Unit representations (B, T, E * orders) from per-order index matrices."""
        parts = [self.embeddings[o][ids[o]] for o in self.orders]
        return parts[0] if len(parts) == 1 else ag.concat(parts, axis=-1)

    def encode(self, batch, training=False, rng=None):
        """BiGRU features (B, T, 2H)."""
        rate = self.cfg.dropout_rate
        x = self.represent(batch.ids)
        x = dropout(x, rate, training, rng)
        T = x.shape[1]
        rows, cols = reversal_index(batch.lengths, T)
        h_fw = self.fwd.run(x)
        h_bw = self.bwd.run(x[rows, cols])[rows, cols]
        h = ag.concat([h_fw, h_bw], axis=-1)
        return dropout(h, rate, training, rng)

    def emissions(self, batch, training=False, rng=None):
        return self.encode(batch, training, rng) @ self.W_out + self.b_out

    def loss(self, batch, training=False, rng=None):
        em = self.emissions(batch, training, rng)
        nll = crf_batch_nll(em, self.transitions, batch.tags, batch.lengths)
        return nll.sum() * (1.0 / len(batch.lengths))

    def tag_units(self, unit_seqs):
        """Viterbi tags for each unit sequence; long ones are cut and re-joined."""
        pieces = []  # (sentence index, piece start, Example)
        for si, units in enumerate(unit_seqs):
            for a, b in split_pieces(len(units.units)):
                pieces.append((si, a, self.example(units.units[a:b])))
        results = [[None] * len(u.units) for u in unit_seqs]
        by_bucket = {}
        for item in pieces:
            by_bucket.setdefault(bucket_for(len(item[2].units)), []).append(item)
        step = max(self.cfg.batch_size, 32)
        for bucket in sorted(by_bucket):
            items = by_bucket[bucket]
            for k in range(0, len(items), step):
                chunk = items[k: k + step]
                batch = make_batch([it[2] for it in chunk], self.orders)
                em = self.emissions(batch).data
                for row, (si, start, ex) in enumerate(chunk):
                    path = crf_viterbi(em[row], self.transitions.data, len(ex.units))
                    results[si][start: start + len(path)] = [self.tagset[p] for p in path]
        return [tuple(r) for r in results]

    def snapshot(self):
        return [p.data.copy() for p in self.parameters()]

    def restore(self, values):
        for p, v in zip(self.parameters(), values):
            p.data = v.copy()


def tagset_for(sentences):
    for s in sentences:
        if any(t.is_multiword_range and not t.is_segmental for t in s.tokens):
            return FULL_TAGSET
    return PLAIN_TAGSET


def gold_examples(model, sentences):
    """Encode gold sentences, cutting long ones into pieces; sentences that fail to align are skipped."""
    examples, skipped = [], 0
    for s in sentences:
        units = unitize(reconstruct_text(s), model.unit_mode)
        if not units.units:
            continue
        try:
            tags = encode_tags(s, units)
        except EncodeError as exc:
            skipped += 1
            log.warning("skipping sentence: %s", exc)
            continue
        for a, b in split_pieces(len(units.units)):
            examples.append(model.example(units.units[a:b], tags[a:b]))
    return examples, skipped


def make_batches(examples, batch_size, rng, orders):
    """Shuffle, group by length bucket, chunk, then shuffle the batch order."""
    order = rng.permutation(len(examples))
    buckets = {}
    for i in order:
        buckets.setdefault(bucket_for(len(examples[i].units)), []).append(examples[i])
    batches = []
    for b in sorted(buckets):
        group = buckets[b]
        for k in range(0, len(group), batch_size):
            batches.append(make_batch(group[k: k + batch_size], orders))
    perm = rng.permutation(len(batches))
    return [batches[i] for i in perm]


@dataclass
class Segmented:
    text: str
    spans: tuple  # tags.Span
    words: list[list[str]]  # per span: the produced words

    @property
    def flat_words(self):
        return [w for ws in self.words for w in ws]


def predict(model, texts, transduce=None):
    """Segment raw sentences.  ``transduce`` maps a multiword surface to its words."""
    texts = list(texts)
    unit_seqs = [unitize(t, model.unit_mode) for t in texts]
    out = [None] * len(texts)
    live = [i for i, u in enumerate(unit_seqs) if u.units]
    tagged = model.tag_units([unit_seqs[i] for i in live])
    for i, tags in zip(live, tagged):
        dec = decode_tags(unit_seqs[i], tags)
        words = []
        for span in dec.spans:
            if span.multiword and transduce is not None:
                words.append(list(transduce(span.text)))
            else:
                words.append([span.text])
        out[i] = Segmented(texts[i], dec.spans, words)
    for i in range(len(texts)):
        if out[i] is None:
            out[i] = Segmented(texts[i], (), [])
    return out


def evaluate_words(predictions, gold_sentences):
    total = EvalResult(0, 0, 0)
    for p, g in zip(predictions, gold_sentences):
        total = total + prf(p.flat_words, g.words)
    return total


def train_main(model, train_sents, dev_sents, cfg=None, transduce=None, progress=None):
    """Train with Adagrad for cfg.main_epochs; keep the weights of the best dev-F1 epoch.

    Returns (model, history) where history holds one dict per epoch.
    """
    cfg = cfg or model.cfg
    dev_sents = list(dev_sents)
    if not dev_sents:
        raise ValueError("train_main needs development data; carve 10% of training data if none exists")
    rng = np.random.default_rng([cfg.seed, 1])
    examples, skipped = gold_examples(model, train_sents)
    if not examples:
        raise ValueError("no encodable training sentences")
    dev_texts = [reconstruct_text(s) for s in dev_sents]
    opt = Adagrad(model.parameters(), cfg)
    history = []
    best_f1, best = -1.0, None
    for epoch in range(cfg.main_epochs):
        total, count = 0.0, 0
        for batch in make_batches(examples, cfg.batch_size, rng, model.orders):
            loss = model.loss(batch, training=True, rng=rng)
            ag.backward(loss)
            opt.step(epoch)
            total += float(loss.data) * len(batch.lengths)
            count += len(batch.lengths)
        preds = predict(model, dev_texts, transduce)
        res = evaluate_words(preds, dev_sents)
        entry = {"epoch": epoch + 1, "loss": total / count, "dev_f1": res.f1}
        history.append(entry)
        if progress:
            progress(entry)
        log.info("epoch %d loss %.4f dev F1 %.4f", epoch + 1, entry["loss"], res.f1)
        if res.f1 > best_f1:
            best_f1, best = res.f1, model.snapshot()
    if best is not None:
        model.restore(best)
    return model, history


def new_model(train_sents, unit_mode=UnitMode.CHARACTER, uses_ngrams=False, cfg=None):
    cfg = cfg or TrainConfig()
    train_sents = list(train_sents)
    unit_seqs = [unitize(reconstruct_text(s), unit_mode) for s in train_sents]
    vocab = build_vocab([u for u in unit_seqs if u.units], uses_ngrams)
    return SegModel(vocab, tagset_for(train_sents), unit_mode, uses_ngrams, cfg,
                    np.random.default_rng(cfg.seed))


def clone(model):
    return copy.deepcopy(model)

"""Transduction of non-segmental multiword tokens: training dictionary plus an
attention encoder-decoder for languages with many multiword-token types."""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Parameter
from .evaluate import acc_mfs
from .optim import Adagrad, TrainConfig, glorot_init
from .recurrent import LSTMCell

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 200
MIN_ENCDEC_PAIRS = 20
PAD, UNK, GO, STOP, SEP = 0, 1, 2, 3, 4
SPECIALS = ("<pad>", "<unk>", "<go>", "<stop>", "<sep>")
NEG_INF = -1e9


@dataclass
class TransductionTable:
    entries: dict[str, tuple[str, ...]] = field(default_factory=dict)
    counts: dict[str, Counter] = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def get(self, surface):
        return self.entries.get(surface)

    def single_transduction_share(self):
        """Fraction of surfaces that were only ever seen with one transduction."""
        if not self.counts:
            return 1.0
        return sum(len(c) == 1 for c in self.counts.values()) / len(self.counts)


def non_segmental_tokens(sentences):
    for s in sentences:
        for tok in s.tokens:
            if tok.is_multiword_range and not tok.is_segmental:
                yield tok


def build_table(sentences):
    """Most frequent transduction per surface; ties go to the lexicographically smallest."""
    counts = defaultdict(Counter)
    for tok in non_segmental_tokens(sentences):
        counts[tok.form][tok.words] += 1
    entries = {}
    for surface in sorted(counts):
        alts = counts[surface]
        best = max(alts.values())
        entries[surface] = min(w for w, c in alts.items() if c == best)
    return TransductionTable(entries, dict(counts))


@dataclass(frozen=True)
class TransductionPolicy:
    has_encdec: bool
    unique_mwts: int = 0
    threshold: int = DEFAULT_THRESHOLD

    @classmethod
    def decide(cls, table, threshold=DEFAULT_THRESHOLD):
        return cls(len(table) > threshold, len(table), threshold)


class TransducerModel:
    """Character encoder-decoder with additive attention.

    The LSTM input is [symbol embedding ; previous attention context]; the
    encoder feeds a zero context.  With ``share_encdec_weights`` encoder and
    decoder run the same cell.
    """

    def __init__(self, symbols, cfg=None, rng=None):
        self.cfg = cfg or TrainConfig()
        rng = rng if rng is not None else np.random.default_rng(self.cfg.seed)
        self.symbols = list(symbols)
        self.index = {s: i for i, s in enumerate(self.symbols)}
        V, E, H = len(self.symbols), self.cfg.char_embedding_size, self.cfg.rnn_state_size
        self.H = H
        self.emb = Parameter(glorot_init((V, E), rng), "mwt.emb")
        self.encoder = LSTMCell("mwt.enc", E + H, H, rng)
        self.shared = self.cfg.share_encdec_weights
        self.decoder = self.encoder if self.shared else LSTMCell("mwt.dec", E + H, H, rng)
        self.W_att = Parameter(glorot_init((H, H), rng), "mwt.att.W")
        self.U_att = Parameter(glorot_init((H, H), rng), "mwt.att.U")
        self.v_att = Parameter(glorot_init((H, 1), rng), "mwt.att.v")
        self.W_comb = Parameter(glorot_init((2 * H, H), rng), "mwt.comb.W")
        self.b_comb = Parameter(np.zeros(H), "mwt.comb.b")
        self.W_out = Parameter(glorot_init((H, V), rng), "mwt.out.W")
        self.b_out = Parameter(np.zeros(V), "mwt.out.b")

    @classmethod
    def for_pairs(cls, pairs, cfg=None, rng=None):
        chars = set()
        for surface, words in pairs:
            chars.update(surface)
            for w in words:
                chars.update(w)
        return cls(list(SPECIALS) + sorted(chars), cfg, rng)

    def parameters(self):
        params = [self.emb] + self.encoder.parameters()
        if not self.shared:
            params += self.decoder.parameters()
        params += [self.W_att, self.U_att, self.v_att, self.W_comb, self.b_comb, self.W_out, self.b_out]
        return params

    def encode_source(self, surface):
        return [self.index.get(ch, UNK) for ch in surface]

    def encode_target(self, words):
        seq = []
        for i, w in enumerate(words):
            if i:
                seq.append(SEP)
            seq.extend(self.index.get(ch, UNK) for ch in w)
        return seq + [STOP]

    def decode_symbols(self, ids):
        parts, cur = [], []
        for i in ids:
            if i == STOP:
                break
            if i == SEP:
                parts.append("".join(cur))
                cur = []
            elif i >= len(SPECIALS):
                cur.append(self.symbols[i])
        parts.append("".join(cur))
        return [p for p in parts if p]

    # -- network --------------------------------------------------------
    def _zeros(self, B):
        return ag.Tensor(np.zeros((B, self.H)))

    def run_encoder(self, src, lengths):
        """src (B, S) ints -> encoder states (B, S, H), final (h, c) at each true length."""
        B, S = src.shape
        x = self.emb[src]
        zeros = self._zeros(B)
        state = None
        hs, cs = [], []
        for t in range(S):
            state = self.encoder.step(ag.concat([x[:, t, :], zeros], axis=-1), state)
            hs.append(state[0])
            cs.append(state[1])
        H_all = ag.stack(hs, axis=1)
        C_all = ag.stack(cs, axis=1)
        rows = np.arange(B)
        last = np.asarray(lengths) - 1
        return H_all, (H_all[rows, last], C_all[rows, last])

    def attention_keys(self, enc):
        return enc @ self.W_att

    def decoder_step(self, prev_ids, prev_ctx, state, enc, keys, src_mask):
        B = len(prev_ids)
        inp = ag.concat([self.emb[np.asarray(prev_ids)], prev_ctx], axis=-1)
        h, c = self.decoder.step(inp, state)
        q = ag.reshape(h @ self.U_att, (B, 1, self.H))
        scores = ag.reshape(ag.tanh(keys + q) @ self.v_att, (B, -1)) + src_mask
        alpha = ag.softmax(scores, axis=1)
        ctx = (ag.reshape(alpha, (B, -1, 1)) * enc).sum(axis=1)
        out = ag.tanh(ag.concat([h, ctx], axis=-1) @ self.W_comb + self.b_comb)
        logits = out @ self.W_out + self.b_out
        return logits, ctx, (h, c)

    def _pad(self, seqs):
        L = max(len(s) for s in seqs)
        arr = np.zeros((len(seqs), L), dtype=np.int64)
        for i, s in enumerate(seqs):
            arr[i, : len(s)] = s
        return arr, np.array([len(s) for s in seqs])

    def loss(self, pairs):
        """Teacher-forced cross-entropy summed over target steps, averaged over pairs."""
        src, src_len = self._pad([self.encode_source(s) for s, _ in pairs])
        tgt, tgt_len = self._pad([self.encode_target(w) for _, w in pairs])
        B = len(pairs)
        src_mask = np.where(np.arange(src.shape[1])[None, :] < src_len[:, None], 0.0, NEG_INF)
        enc, state = self.run_encoder(src, src_len)
        keys = self.attention_keys(enc)
        ctx = self._zeros(B)
        prev = np.full(B, GO)
        total = None
        rows = np.arange(B)
        for t in range(tgt.shape[1]):
            logits, ctx, state = self.decoder_step(prev, ctx, state, enc, keys, src_mask)
            logp = ag.log_softmax(logits, axis=-1)
            m = (t < tgt_len).astype(np.float64)
            step = -(logp[rows, tgt[:, t]] * m).sum()
            total = step if total is None else total + step
            prev = tgt[:, t]
        return total * (1.0 / B)

    def greedy(self, surfaces):
        """Greedy decoding; each row stops at STOP or after 3*len + 5 symbols."""
        surfaces = list(surfaces)
        if not surfaces:
            return []
        src_ids = [self.encode_source(s) or [UNK] for s in surfaces]
        src, src_len = self._pad(src_ids)
        B = len(surfaces)
        caps = 3 * np.array([len(s) for s in surfaces]) + 5
        src_mask = np.where(np.arange(src.shape[1])[None, :] < src_len[:, None], 0.0, NEG_INF)
        enc, state = self.run_encoder(src, src_len)
        keys = self.attention_keys(enc)
        ctx = self._zeros(B)
        prev = np.full(B, GO)
        outputs = [[] for _ in range(B)]
        done = np.zeros(B, dtype=bool)
        for t in range(int(caps.max())):
            logits, ctx, state = self.decoder_step(prev, ctx, state, enc, keys, src_mask)
            choice = np.argmax(logits.data, axis=-1)
            for b in range(B):
                if done[b]:
                    continue
                outputs[b].append(int(choice[b]))
                if choice[b] == STOP or len(outputs[b]) >= caps[b]:
                    done[b] = True
            if done.all():
                break
            prev = choice
        return [self.decode_symbols(o) for o in outputs]

    def snapshot(self):
        return [p.data.copy() for p in self.parameters()]

    def restore(self, values):
        for p, v in zip(self.parameters(), values):
            p.data = v.copy()


def decode_encdec(model, surface):
    comps = model.greedy([surface])[0]
    return tuple(comps) if comps else (surface,)


def split_validation(pairs, rng, share=0.05):
    perm = rng.permutation(len(pairs))
    n_val = max(1, int(round(share * len(pairs))))
    val = [pairs[i] for i in sorted(perm[:n_val])]
    train = [pairs[i] for i in sorted(perm[n_val:])]
    return train, val


def evaluate_encdec(model, pairs):
    outputs = [tuple(o) or (s,) for o, (s, _) in zip(model.greedy([s for s, _ in pairs]), pairs)]
    return acc_mfs(outputs, [w for _, w in pairs])


def train_encdec(pairs, cfg=None, progress=None):
    """Train on unique (surface, words) pairs; 5% held out picks the best epoch by exact match.

    Returns (model, history).
    """
    cfg = cfg or TrainConfig()
    pairs = sorted((s, tuple(w)) for s, w in pairs)
    if len(pairs) < MIN_ENCDEC_PAIRS:
        raise ValueError(f"need at least {MIN_ENCDEC_PAIRS} unique multiword tokens, got {len(pairs)}")
    rng = np.random.default_rng([cfg.seed, 2])
    train, val = split_validation(pairs, rng)
    model = TransducerModel.for_pairs(pairs, cfg, np.random.default_rng([cfg.seed, 3]))
    opt = Adagrad(model.parameters(), cfg, encdec=True)
    history = []
    best_acc, best = -1.0, None
    for epoch in range(cfg.encdec_epochs):
        order = rng.permutation(len(train))
        total = 0.0
        for k in range(0, len(order), cfg.batch_size):
            chunk = [train[i] for i in order[k: k + cfg.batch_size]]
            loss = model.loss(chunk)
            ag.backward(loss)
            opt.step(epoch)
            total += float(loss.data) * len(chunk)
        acc, mfs = evaluate_encdec(model, val)
        entry = {"epoch": epoch + 1, "loss": total / len(train), "val_acc": acc, "val_mfs": mfs}
        history.append(entry)
        if progress:
            progress(entry)
        log.info("encdec epoch %d loss %.4f ACC %.4f MFS %.4f", epoch + 1, entry["loss"], acc, mfs)
        if acc > best_acc:
            best_acc, best = acc, model.snapshot()
    if best is not None:
        model.restore(best)
    model.validation = val
    return model, history


def transduce(policy, table, model, surface):
    """Dictionary first, then the encoder-decoder when the policy allows it, else identity."""
    hit = table.get(surface)
    if hit:
        return tuple(hit)
    if policy.has_encdec and model is not None:
        return decode_encdec(model, surface)
    return (surface,)


class Transducer:
    """Bundles policy, table and optional model behind a cached callable."""

    def __init__(self, policy, table, model=None):
        self.policy = policy
        self.table = table
        self.model = model
        self._cache = {}

    def __call__(self, surface):
        if surface not in self._cache:
            self._cache[surface] = transduce(self.policy, self.table, self.model, surface)
        return self._cache[surface]

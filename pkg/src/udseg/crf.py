"""First-order linear-chain CRF: forward-algorithm loss and Viterbi decoding.

Transitions live in one (K+2, K+2) matrix over the tagset plus two extra
states: row ``K`` holds start->tag scores, column ``K+1`` holds tag->stop
scores.  Other entries of the extra rows/columns are unused.
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from .autograd import Tensor, as_tensor


def start_index(K):
    return K


def stop_index(K):
    return K + 1


def crf_batch_nll(emissions, transitions, tags, lengths):
    """Per-sequence negative log-likelihood, shape (B,).

    emissions: (B, T, K) tensor; transitions: (K+2, K+2) tensor;
    tags: (B, T) int array (padding may hold any valid index);
    lengths: (B,) int array with 1 <= length <= T.
    """
    emissions, transitions = as_tensor(emissions), as_tensor(transitions)
    B, T, K = emissions.shape
    tags = np.asarray(tags, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    if tags.min(initial=0) < 0 or tags.max(initial=0) >= K:
        raise ValueError(f"gold tag index out of range for tagset of size {K}")
    if lengths.min() < 1 or lengths.max() > T:
        raise ValueError("lengths must lie in [1, T]")
    mask = (np.arange(T)[None, :] < lengths[:, None]).astype(np.float64)

    trans = transitions[:K, :K]
    start = transitions[K, :K]
    stop = transitions[:K, K + 1]

    alpha = emissions[:, 0, :] + start
    for t in range(1, T):
        scores = ag.reshape(alpha, (B, K, 1)) + trans
        new = ag.logsumexp(scores, axis=1) + emissions[:, t, :]
        m = mask[:, t]
        if m.all():
            alpha = new
        elif not m.any():
            continue
        else:
            m = m[:, None]
            alpha = new * m + alpha * (1.0 - m)
    log_z = ag.logsumexp(alpha + stop, axis=1)

    rows = np.arange(B)[:, None]
    cols = np.arange(T)[None, :]
    gold = (emissions[rows, cols, tags] * mask).sum(axis=1)
    if T > 1:
        pair = transitions[tags[:, :-1], tags[:, 1:]]
        gold = gold + (pair * mask[:, 1:]).sum(axis=1)
    gold = gold + transitions[np.full(B, K), tags[:, 0]]
    last = tags[np.arange(B), lengths - 1]
    gold = gold + transitions[last, np.full(B, K + 1)]
    return log_z - gold


def crf_neg_log_likelihood(emissions, transitions, gold, length=None):
    """Scalar loss log Z - score(gold) for one sequence with (T, K) emissions."""
    emissions = as_tensor(emissions)
    T, K = emissions.shape
    length = T if length is None else length
    gold = np.asarray(gold, dtype=np.int64)
    if gold.shape[0] < length:
        raise ValueError("gold sequence shorter than length")
    padded = np.zeros((1, T), dtype=np.int64)
    padded[0, :length] = gold[:length]
    loss = crf_batch_nll(ag.reshape(emissions, (1, T, K)), transitions, padded, [length])
    return ag.reshape(loss, ())


def sequence_score(emissions, transitions, tags):
    """Unnormalized score of a full tag path (numpy, no graph)."""
    e = np.asarray(emissions.data if isinstance(emissions, Tensor) else emissions)
    tr = np.asarray(transitions.data if isinstance(transitions, Tensor) else transitions)
    K = e.shape[1]
    tags = list(tags)
    s = tr[K, tags[0]] + tr[tags[-1], K + 1]
    s += sum(e[i, y] for i, y in enumerate(tags))
    s += sum(tr[a, b] for a, b in zip(tags, tags[1:]))
    return float(s)


def crf_viterbi(emissions, transitions, length=None):
    """Highest-scoring tag path; ties resolve to the lowest tag index."""
    e = np.asarray(emissions.data if isinstance(emissions, Tensor) else emissions)
    tr = np.asarray(transitions.data if isinstance(transitions, Tensor) else transitions)
    T, K = e.shape
    length = T if length is None else length
    if length == 0:
        return []
    trans = tr[:K, :K]
    score = tr[K, :K] + e[0]
    pointers = []
    for t in range(1, length):
        cand = score[:, None] + trans
        best = np.argmax(cand, axis=0)
        pointers.append(best)
        score = cand[best, np.arange(K)] + e[t]
    last = int(np.argmax(score + tr[:K, K + 1]))
    path = [last]
    for best in reversed(pointers):
        last = int(best[last])
        path.append(last)
    path.reverse()
    return path

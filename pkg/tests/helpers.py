"""Shared fixtures data and a finite-difference gradient checker."""

import numpy as np

from udseg import autograd as ag

GOLDEN_TEXT = (
    "On considère qu'environ 50 000 Allemands du Wartheland ont péri pendant la période."
)

_FIG1_ROWS = [
    ("1", "On"), ("2", "considère"), ("3-4", "qu'environ"), ("3", "qu'"), ("4", "environ"),
    ("5", "50 000"), ("6", "Allemands"), ("7-8", "du"), ("7", "de"), ("8", "le"),
    ("9", "Wartheland"), ("10", "ont"), ("11", "péri"), ("12", "pendant"), ("13", "la"),
    ("14", "période"), ("15", "."),
]


def _fig1():
    lines = [f"# text = {GOLDEN_TEXT}"]
    for ident, form in _FIG1_ROWS:
        misc = "SpaceAfter=No" if ident == "14" else "_"
        lines.append("\t".join([ident, form] + ["_"] * 7 + [misc]))
    return "\n".join(lines) + "\n\n"


GOLDEN_CONLLU = _fig1()

M = "̄"
GOLDEN_TAGS = (
    "BEXBIIIIIIIEXBIEBIIIIIEXBIIIIEXBIIIIIIIEX"
    f"B{M}E{M}"
    "XBIIIIIIIIEXBIEXBIIEXBIIIIIEXBEXBIIIIIES"
)


def conllu(*sentences):
    """Build CoNLL-U text from sentences given as lists of (id, form[, misc])."""
    out = []
    for rows in sentences:
        for row in rows:
            ident, form = row[0], row[1]
            misc = row[2] if len(row) > 2 else "_"
            out.append("\t".join([ident, form] + ["_"] * 7 + [misc]))
        out.append("")
    return "\n".join(out) + "\n"


def numeric_grads(loss_fn, params, h=1e-5):
    """Central differences of a scalar loss_fn() w.r.t. every entry of every parameter."""
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        it = np.nditer(p.data, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = p.data[idx]
            p.data[idx] = old + h
            up = float(loss_fn().data)
            p.data[idx] = old - h
            down = float(loss_fn().data)
            p.data[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def max_relative_error(loss_fn, params, h=1e-5, floor=1e-6):
    for p in params:
        p.grad = None
    ag.backward(loss_fn())
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    numeric = numeric_grads(loss_fn, params, h)
    worst = 0.0
    for ana, num in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(ana), np.abs(num)), floor)
        worst = max(worst, float((np.abs(ana - num) / denom).max()))
    return worst


def all_path_scores(emissions, transitions):
    """Scores of every tag path (K**T of them), enumerated as a dense array."""
    T, K = emissions.shape
    paths = np.indices((K,) * T).reshape(T, -1).T
    s = transitions[K, paths[:, 0]] + transitions[paths[:, -1], K + 1]
    s = s + emissions[np.arange(T)[None, :], paths].sum(axis=1)
    if T > 1:
        s = s + transitions[paths[:, :-1], paths[:, 1:]].sum(axis=1)
    return paths, s


def brute_log_z(emissions, transitions):
    _, s = all_path_scores(emissions, transitions)
    m = s.max()
    return float(m + np.log(np.exp(s - m).sum()))


# criterion number -> (PASS/FAIL/SKIP, description); filled by test_acceptance
ACCEPTANCE = {}

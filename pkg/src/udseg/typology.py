"""Corpus-level typological factors and the small statistics toolkit used to
study them (correlation, standardization, k-means, PCA, Huber regression).

Also holds the rules that turn a training profile into segmenter settings.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .conllu import reconstruct_text
from .tags import UnitMode
from .transducer import DEFAULT_THRESHOLD


class TypologyError(ValueError):
    pass


@dataclass(frozen=True)
class TypoProfile:
    cs: int
    ls: int
    al: float
    sf: float
    mp: float
    ms: int
    train_size: int
    internal_space_ratio: float = 0.0

    def factors(self):
        """The six duplication-invariant factors, in the usual column order."""
        return {"CS": self.cs, "LS": self.ls, "AL": self.al, "SF": self.sf, "MP": self.mp, "MS": self.ms}


def _sentences(docs):
    if hasattr(docs, "sentences"):
        docs = [docs]
    for doc in docs:
        if hasattr(doc, "sentences"):
            yield from doc.sentences
        else:
            yield doc


def compute_factors(docs):
    """Profile of a training corpus (a Document, or an iterable of Documents/Sentences)."""
    chars, forms, mwt_surfaces = set(), set(), set()
    n_sent = n_words = n_chars = n_segments = n_tokens = n_mwt = n_spaced = 0
    for sent in _sentences(docs):
        n_sent += 1
        raw = reconstruct_text(sent)
        chars.update(ch for ch in raw if not ch.isspace())
        n_segments += len(raw.split())
        for w in sent.words:
            forms.add(w)
            n_chars += len(w)
            if any(ch.isspace() for ch in w):
                n_spaced += 1
        n_words += len(sent.words)
        for tok in sent.tokens:
            n_tokens += 1
            if tok.is_multiword_range and not tok.is_segmental:
                n_mwt += 1
                mwt_surfaces.add(tok.form)
    if n_sent == 0 or n_words == 0:
        raise TypologyError("cannot profile an empty corpus")
    if n_segments == 0:
        raise TypologyError("corpus has no raw text to profile")
    return TypoProfile(
        cs=len(chars),
        ls=len(forms),
        al=n_chars / n_words,
        sf=n_words / n_segments,
        mp=n_mwt / n_tokens if n_tokens else 0.0,
        ms=len(mwt_surfaces),
        train_size=n_sent,
        internal_space_ratio=n_spaced / n_words,
    )


def pearson(xs, ys):
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise TypologyError("pearson needs two 1-D sequences of equal length")
    if len(x) < 2:
        raise TypologyError("pearson needs at least two observations")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt(dx @ dx), np.sqrt(dy @ dy)
    if sx == 0 or sy == 0:
        raise TypologyError("pearson is undefined for a constant sequence")
    return float(np.clip((dx @ dy) / (sx * sy), -1.0, 1.0))


class Standardizer:
    """(x - mean) / std per column, std being the population standard deviation."""

    def __init__(self):
        self.mean = None
        self.std = None

    def fit(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or len(X) < 2:
            raise TypologyError("standardizer needs a 2-D matrix with at least two rows")
        self.mean = X.mean(axis=0)
        self.std = X.std(axis=0)
        flat = np.flatnonzero(self.std <= 1e-12 * np.maximum(1.0, np.abs(self.mean)))
        if len(flat):
            raise TypologyError(f"constant feature column(s) {flat.tolist()} cannot be standardized")
        return self

    def transform(self, X):
        if self.mean is None:
            raise TypologyError("standardizer is not fitted")
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std

    def fit_transform(self, X):
        return self.fit(X).transform(X)


# -- k-means -------------------------------------------------------------------

@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    history: list
    iterations: int


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=-1)


def kmeans_pp_init(X, k, rng):
    n = len(X)
    chosen = [int(rng.integers(n))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            # all remaining points coincide with a chosen centre
            rest = [i for i in range(n) if i not in chosen]
            nxt = int(rng.choice(rest))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[chosen].copy()


def kmeans(points, k=6, seed=0, max_iter=100):
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if k < 1:
        raise TypologyError("k must be positive")
    if len(X) < k:
        raise TypologyError(f"k-means needs at least k={k} points, got {len(X)}")
    rng = np.random.default_rng(seed)
    C = kmeans_pp_init(X, k, rng)
    labels = np.argmin(_sq_dists(X, C), axis=1)
    history = [float(_sq_dists(X, C)[np.arange(len(X)), labels].sum())]
    it = 0
    for it in range(1, max_iter + 1):
        for j in range(k):
            members = X[labels == j]
            if len(members):
                C[j] = members.mean(axis=0)
        D = _sq_dists(X, C)
        new = np.argmin(D, axis=1)
        history.append(float(D[np.arange(len(X)), new].sum()))
        if np.array_equal(new, labels):
            break
        labels = new
    return KMeansResult(labels, C, history[-1], history, it)


# -- PCA -----------------------------------------------------------------------

@dataclass
class PCAResult:
    projected: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    explained_ratio: np.ndarray
    mean: np.ndarray


def _orthogonal_fill(found, d):
    """A unit vector orthogonal to all rows of ``found`` (used for null directions)."""
    for j in range(d):
        v = np.zeros(d)
        v[j] = 1.0
        for u in found:
            v -= (u @ v) * u
        n = np.linalg.norm(v)
        if n > 1e-6:
            return v / n
    raise TypologyError("no orthogonal direction left")


def power_iteration(C, rng, tol=1e-10, max_iter=20000):
    d = len(C)
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    scale = max(np.abs(C).max(), 1e-300)
    for _ in range(max_iter):
        w = C @ v
        norm = np.linalg.norm(w)
        if norm <= 1e-14 * scale:
            return None, 0.0
        w /= norm
        if w @ v < 0:
            w = -w
        done = np.linalg.norm(w - v) < tol
        v = w
        if done:
            break
    return v, float(v @ C @ v)


def pca_project(points, dims=2, tol=1e-10, seed=0):
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or len(X) < 2:
        raise TypologyError("PCA needs a 2-D matrix with at least two rows")
    n, d = X.shape
    if dims > d:
        raise TypologyError(f"cannot take {dims} components from {d} features")
    mean = X.mean(axis=0)
    Xc = X - mean
    C = Xc.T @ Xc / n
    total = float(np.trace(C))
    rng = np.random.default_rng(seed)
    comps, eigs = [], []
    deflated = C.copy()
    for _ in range(dims):
        v, lam = power_iteration(deflated, rng, tol)
        if v is None:
            v, lam = _orthogonal_fill(comps, d), 0.0
        lam = max(lam, 0.0)
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        if len(nz) and v[nz[0]] < 0:
            v = -v
        comps.append(v)
        eigs.append(lam)
        deflated = deflated - lam * np.outer(v, v)
    W = np.array(comps)
    eigs = np.array(eigs)
    ratio = eigs / total if total > 0 else np.zeros(dims)
    return PCAResult(Xc @ W.T, W, eigs, ratio, mean)


# -- Huber regression -------------------------------------------------------------

@dataclass
class HuberFit:
    coef: np.ndarray
    intercept: float
    iterations: int
    scale: float
    converged: bool

    def predict(self, X):
        return np.asarray(X, dtype=np.float64) @ self.coef + self.intercept


def huber_loss(r, delta):
    a = np.abs(r)
    return np.where(a <= delta, 0.5 * r * r, delta * (a - 0.5 * delta))


def _weighted_lstsq(A, y, w):
    M = A.T @ (A * w[:, None])
    if np.linalg.cond(M) > 1e12:
        raise TypologyError("reweighted least-squares system is singular")
    return np.linalg.solve(M, A.T @ (w * y))


def huber_regress(X, y, delta=1.35, tol=1e-8, max_iter=200):
    """Huber-loss linear regression by iteratively reweighted least squares.

    Residuals are measured in units of a robust scale (median absolute
    residual / 0.6745), re-estimated each iteration, so ``delta`` is
    dimensionless.  Starts from the ordinary least-squares fit.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if len(y) != n:
        raise TypologyError("feature and target row counts differ")
    if n < p + 1:
        raise TypologyError(f"need at least {p + 1} rows for {p} features, got {n}")
    A = np.hstack([X, np.ones((n, 1))])
    w = np.ones(n)
    beta = _weighted_lstsq(A, y, w)
    floor = 1e-12 * max(1.0, float(np.abs(y).max()))
    scale = 0.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r = y - A @ beta
        scale = float(np.median(np.abs(r))) / 0.6745
        if scale <= floor:
            # at least half of the points are fit exactly; nothing left to reweight
            converged = True
            break
        a = np.abs(r) / scale
        w = np.where(a <= delta, 1.0, delta / np.maximum(a, 1e-300))
        new = _weighted_lstsq(A, y, w)
        change = float(np.abs(new - beta).max())
        beta = new
        if change < tol:
            converged = True
            break
    return HuberFit(beta[:p].copy(), float(beta[p]), it, scale, converged)


# -- settings ------------------------------------------------------------------

@dataclass(frozen=True)
class Thresholds:
    internal_space: float = 0.01
    ngram_sf: float = 2.0
    ngram_cs: int = 1000
    encdec_ms: int = DEFAULT_THRESHOLD


@dataclass(frozen=True)
class Settings:
    unit_mode: UnitMode
    uses_ngrams: bool
    transducer_policy: bool

    def as_dict(self):
        d = asdict(self)
        d["unit_mode"] = self.unit_mode.value
        return d


def recommend_settings(profile: TypoProfile, thresholds: Thresholds | None = None, internal_space=None):
    """Rule table: syllables for word-internal spaces, n-grams for large unspaced
    scripts, an encoder-decoder when there are many MWT types.

    ``internal_space`` forces rule 1 on or off regardless of the detected ratio.
    """
    t = thresholds or Thresholds()
    spaced = profile.internal_space_ratio > t.internal_space if internal_space is None else internal_space
    return Settings(
        unit_mode=UnitMode.SYLLABLE if spaced else UnitMode.CHARACTER,
        uses_ngrams=profile.sf > t.ngram_sf and profile.cs > t.ngram_cs,
        transducer_policy=profile.ms > t.encdec_ms,
    )

"""``udseg`` command line: train, segment, evaluate, analyze, recommend.

Exit status: 0 success, 1 usage error, 2 data error, 3 model error.
"""

from __future__ import annotations

import argparse
import io
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .conllu import ConlluError, Document, build_sentence, parse_document, read_conllu, reconstruct_text, serialize_document
from .evaluate import EvaluationError, corpus_prf, format_report, mwt_correctness
from .modelio import ModelError, load_model, save_model
from .optim import TrainConfig
from .segmenter import new_model, predict, train_main
from .tags import EncodeError, UnitMode
from .transducer import (
    MIN_ENCDEC_PAIRS,
    Transducer,
    TransductionPolicy,
    build_table,
    train_encdec,
)
from .typology import (
    Standardizer,
    Thresholds,
    TypologyError,
    compute_factors,
    huber_regress,
    kmeans,
    pca_project,
    pearson,
    recommend_settings,
)

log = logging.getLogger("udseg")

OK, USAGE, DATA, MODEL = 0, 1, 2, 3
FACTOR_COLUMNS = ("TS", "CS", "LS", "AL", "SF", "MP", "MS")


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE, f"{self.prog}: error: {message}\n")


# -- helpers -------------------------------------------------------------------

def _read_doc(path):
    try:
        return read_conllu(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _write_text(path, text):
    f = _open_out(path)
    try:
        f.write(text)
    finally:
        if f is not sys.stdout:
            f.close()


def _parse_bool(value):
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise DataError(f"not a boolean: {value!r}")


def read_settings(path):
    """key=value lines; '#' starts a comment."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    out = {}
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def format_settings(settings, profile=None):
    lines = []
    if profile is not None:
        for k, v in profile.factors().items():
            lines.append(f"# {k} = {v}")
        lines.append(f"# TS = {profile.train_size}")
    lines.append(f"unit_mode={settings.unit_mode.value}")
    lines.append(f"uses_ngrams={str(settings.uses_ngrams).lower()}")
    lines.append(f"transducer_policy={str(settings.transducer_policy).lower()}")
    return "\n".join(lines) + "\n"


def split_dev(sentences, share=0.1):
    """Deterministic tail split: the last ``share`` of sentences become dev data."""
    sentences = list(sentences)
    if len(sentences) < 2:
        raise DataError("need at least two training sentences to carve a development split")
    n_dev = max(1, int(len(sentences) * share))
    return sentences[:-n_dev], sentences[-n_dev:]


def _thresholds(args):
    t = Thresholds()
    if getattr(args, "mwt_threshold", None) is not None:
        t = Thresholds(t.internal_space, t.ngram_sf, t.ngram_cs, args.mwt_threshold)
    return t


# -- train ---------------------------------------------------------------------

def resolve_training(args, profile):
    """Flags > settings file > recommendations > defaults."""
    rec = recommend_settings(profile, _thresholds(args))
    chosen = {
        "unit_mode": rec.unit_mode,
        "uses_ngrams": rec.uses_ngrams,
        "transducer_policy": rec.transducer_policy,
    }
    cfg_values = {}
    if args.settings:
        for k, v in read_settings(args.settings).items():
            if k == "unit_mode":
                chosen[k] = UnitMode(v)
            elif k in ("uses_ngrams", "transducer_policy"):
                chosen[k] = _parse_bool(v)
            else:
                cfg_values[k] = v
    if args.unit_mode:
        chosen["unit_mode"] = UnitMode(args.unit_mode)
    if args.ngrams is not None:
        chosen["uses_ngrams"] = args.ngrams
    for flag, key in (
        ("seed", "seed"),
        ("epochs", "main_epochs"),
        ("encdec_epochs", "encdec_epochs"),
        ("embedding_size", "char_embedding_size"),
        ("state_size", "rnn_state_size"),
        ("batch_size", "batch_size"),
    ):
        value = getattr(args, flag)
        if value is not None:
            cfg_values[key] = value
    try:
        cfg = TrainConfig.from_dict(cfg_values)
    except (TypeError, ValueError) as exc:
        raise DataError(f"bad training configuration: {exc}") from exc
    return chosen, cfg


def cmd_train(args):
    train_doc = _read_doc(args.train)
    if not train_doc.sentences:
        raise DataError(f"{args.train}: no sentences")
    profile = compute_factors(train_doc)
    chosen, cfg = resolve_training(args, profile)
    if args.dev:
        train_sents, dev_sents = list(train_doc.sentences), list(_read_doc(args.dev).sentences)
    else:
        train_sents, dev_sents = split_dev(train_doc.sentences)
        log.info("no dev set given; holding out the last %d sentences", len(dev_sents))

    table = build_table(train_doc.sentences)
    threshold = _thresholds(args).encdec_ms
    wants_encdec = chosen["transducer_policy"]
    if wants_encdec and len(table) < MIN_ENCDEC_PAIRS:
        log.warning("only %d multiword types; using the dictionary alone", len(table))
        wants_encdec = False
    policy = TransductionPolicy(wants_encdec, len(table), threshold)
    log.info(
        "settings: unit_mode=%s uses_ngrams=%s encoder-decoder=%s (%d multiword types)",
        chosen["unit_mode"].value, chosen["uses_ngrams"], wants_encdec, len(table),
    )

    history = []
    encdec = None
    if wants_encdec:
        pairs = sorted(table.entries.items())
        encdec, enc_hist = train_encdec(pairs, cfg)
        history += [{"stage": "encdec", **h} for h in enc_hist]
    transducer = Transducer(policy, table, encdec)

    model = new_model(train_sents, chosen["unit_mode"], chosen["uses_ngrams"], cfg)
    model, main_hist = train_main(model, train_sents, dev_sents, cfg, transduce=transducer)
    history += [{"stage": "main", **h} for h in main_hist]
    try:
        save_model(args.model, model, table, policy, encdec, history)
    except OSError as exc:
        raise DataError(f"cannot write model to {args.model}: {exc.strerror or exc}") from exc
    log.info("model written to %s", args.model)
    return OK


# -- segment -------------------------------------------------------------------

_ROW = re.compile(r"^\d+(?:[-.]\d+)?\t")


def looks_like_conllu(text):
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#") or (_ROW.match(line) and line.count("\t") == 9):
            return True
        return False
    return False


def _read_input(path):
    try:
        if path in (None, "-"):
            return sys.stdin.read()
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc


def segment_text(model, transducer, texts, comments=None):
    comments = comments or [()] * len(texts)
    out = []
    for seg, extra in zip(predict(model, texts, transducer), comments):
        pieces = [(sp.start, sp.end, sp.text, words) for sp, words in zip(seg.spans, seg.words)]
        out.append(build_sentence(seg.text, pieces, extra))
    return Document(tuple(out))


def cmd_segment(args):
    try:
        model, policy, table, encdec = load_model(args.model)
    except (OSError, KeyError, ValueError) as exc:
        raise ModelError(f"cannot load model from {args.model}: {exc}") from exc
    text = _read_input(args.input)
    if looks_like_conllu(text):
        doc = parse_document(io.StringIO(text), args.input or "<stdin>")
        texts = [reconstruct_text(s) for s in doc.sentences]
        comments = [s.comments for s in doc.sentences]
    else:
        # raw text is taken to be presegmented: one sentence per line
        texts = [line.strip() for line in text.splitlines() if line.strip()]
        comments = None
    result = segment_text(model, Transducer(policy, table, encdec), texts, comments)
    _write_text(args.output, serialize_document(result))
    return OK


# -- evaluate ------------------------------------------------------------------

def cmd_evaluate(args):
    gold = _read_doc(args.gold)
    system = _read_doc(args.system)
    res = corpus_prf(system, gold)
    report = format_report([(Path(args.system).name, res)])
    if args.train:
        seen = set(build_table(_read_doc(args.train).sentences).entries)
        correct, total = mwt_correctness(system, gold, seen)
        share = correct / total if total else 1.0
        report += f"\nmwt_seen\tcorrect\ttotal\tshare\n{Path(args.system).name}\t{correct}\t{total}\t{share:.6f}\n"
    _write_text(args.report, report)
    return OK


# -- analyze / recommend ----------------------------------------------------------

def read_f1_table(path):
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    out = {}
    for n, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise DataError(f"{path}:{n}: expected dataset<TAB>f1")
        try:
            out[parts[0]] = float(parts[1])
        except ValueError:
            if n == 1:
                continue  # header
            raise DataError(f"{path}:{n}: not a number: {parts[1]!r}") from None
    return out


def _fmt(x):
    return f"{x:.10g}" if isinstance(x, float) else str(x)


def _profile_row(p):
    return (p.train_size, p.cs, p.ls, p.al, p.sf, p.mp, p.ms)


def _tsv(header, rows):
    lines = ["\t".join(header)]
    lines += ["\t".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _usable_columns(X):
    std = X.std(axis=0)
    return [j for j in range(X.shape[1]) if std[j] > 1e-12 * max(1.0, abs(X[:, j].mean()))]


def cmd_analyze(args):
    out = Path(args.output)
    names, profiles, shares = [], [], []
    for path in args.train:
        doc = _read_doc(path)
        name = Path(path).name.rsplit(".conllu", 1)[0]
        if name in names:
            raise DataError(f"duplicate dataset name {name!r}")
        names.append(name)
        profiles.append(compute_factors(doc))
        shares.append(build_table(doc.sentences).single_transduction_share())
    X = np.array([_profile_row(p) for p in profiles], dtype=np.float64)

    _write_text(out / "factors.tsv", _tsv(("dataset",) + FACTOR_COLUMNS,
                                          [(n,) + _profile_row(p) for n, p in zip(names, profiles)]))
    _write_text(out / "transductions.tsv", _tsv(("dataset", "single_transduction_share"),
                                                zip(names, shares)))

    cols = _usable_columns(X) if len(names) >= 2 else []
    dropped = [FACTOR_COLUMNS[j] for j in range(X.shape[1]) if cols and j not in cols]
    if dropped:
        log.warning("constant factor column(s) %s left out of the analysis", ", ".join(dropped))
    if len(names) >= 2:
        rows = []
        for j in range(1, X.shape[1]):
            if 0 in cols and j in cols:
                rows.append((FACTOR_COLUMNS[j], pearson(X[:, 0], X[:, j])))
        _write_text(out / "correlations.tsv", _tsv(("factor", "pearson_with_TS"), rows))
    if cols:
        Z = Standardizer().fit_transform(X[:, cols])
        if len(names) >= args.k:
            km = kmeans(Z, args.k, seed=args.seed)
            _write_text(out / "clusters.tsv", _tsv(("dataset", "cluster"), zip(names, km.labels.tolist())))
        else:
            log.warning("%d datasets are fewer than k=%d; clustering skipped", len(names), args.k)
        dims = min(2, len(cols))
        pca = pca_project(Z, dims)
        header = ("dataset",) + tuple(f"pc{i + 1}" for i in range(dims))
        text = _tsv(header, [(n,) + tuple(r) for n, r in zip(names, pca.projected.tolist())])
        text += "# explained\t" + "\t".join(_fmt(float(r)) for r in pca.explained_ratio) + "\n"
        _write_text(out / "pca.tsv", text)

    if args.f1_table:
        f1 = read_f1_table(args.f1_table)
        missing = [n for n in names if n not in f1]
        if missing:
            raise DataError(f"{args.f1_table}: no F1 for {', '.join(missing)}")
        if not cols:
            raise DataError("regression needs at least two datasets with varying factors")
        scaler = Standardizer().fit(X[:, cols])
        fit = huber_regress(scaler.transform(X[:, cols]), [f1[n] for n in names])
        rows = [(FACTOR_COLUMNS[j], float(c)) for j, c in zip(cols, fit.coef)]
        rows.append(("intercept", fit.intercept))
        _write_text(out / "regression.tsv", _tsv(("feature", "coefficient"), rows))
    return OK


def cmd_recommend(args):
    profile = compute_factors(_read_doc(args.train))
    settings = recommend_settings(profile, _thresholds(args))
    _write_text(args.output, format_settings(settings, profile))
    return OK


# -- parser --------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="udseg", description="Universal word segmentation for CoNLL-U treebanks.")
    p.add_argument("--version", action="version", version=f"udseg {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    t = sub.add_parser("train", help="train a segmentation model")
    t.add_argument("--train", required=True, help="training CoNLL-U")
    t.add_argument("--dev", help="development CoNLL-U (default: last 10%% of --train)")
    t.add_argument("--model", required=True, help="output model directory")
    t.add_argument("--settings", help="key=value settings file, e.g. from `udseg recommend`")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int, help="main model epochs")
    t.add_argument("--encdec-epochs", type=int)
    t.add_argument("--unit-mode", choices=[m.value for m in UnitMode])
    t.add_argument("--ngrams", dest="ngrams", action="store_true", default=None)
    t.add_argument("--no-ngrams", dest="ngrams", action="store_false")
    t.add_argument("--mwt-threshold", type=int, help="unique multiword types needed for the encoder-decoder")
    t.add_argument("--embedding-size", type=int)
    t.add_argument("--state-size", type=int)
    t.add_argument("--batch-size", type=int)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("segment", help="segment raw text or re-segment CoNLL-U")
    s.add_argument("--model", required=True)
    s.add_argument("--input", default="-")
    s.add_argument("--output", default="-")
    s.add_argument("--presegmented", action="store_true",
                   help="raw input holds one sentence per line (always assumed)")
    s.set_defaults(func=cmd_segment)

    e = sub.add_parser("evaluate", help="word-level LCS precision/recall/F1")
    e.add_argument("--gold", required=True)
    e.add_argument("--system", required=True)
    e.add_argument("--report", default="-")
    e.add_argument("--train", help="training CoNLL-U; adds multiword correctness on seen types")
    e.set_defaults(func=cmd_evaluate)

    a = sub.add_parser("analyze", help="typological factors, clusters, PCA, regression")
    a.add_argument("--train", required=True, nargs="+", help="one training CoNLL-U per dataset")
    a.add_argument("--output", required=True, help="output directory for the TSV files")
    a.add_argument("--f1-table", help="dataset<TAB>F1 observations for the regression")
    a.add_argument("--k", type=int, default=6)
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("recommend", help="settings file from training data")
    r.add_argument("--train", required=True)
    r.add_argument("--output", default="-")
    r.add_argument("--mwt-threshold", type=int)
    r.set_defaults(func=cmd_recommend)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ModelError as exc:
        print(f"udseg: model error: {exc}", file=sys.stderr)
        return MODEL
    except (DataError, ConlluError, EvaluationError, TypologyError, EncodeError, ValueError) as exc:
        print(f"udseg: {exc}", file=sys.stderr)
        return DATA
    except OSError as exc:
        print(f"udseg: {exc}", file=sys.stderr)
        return DATA


if __name__ == "__main__":
    sys.exit(main())

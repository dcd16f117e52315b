"""Model directory: ``meta``, ``vocab.tsv``, ``params.bin``, ``mwt.tsv``, ``train.log``.

params.bin is a flat sequence of records, one per parameter in declared order:
u64 name length, UTF-8 name, u64 rank, rank x u64 dims, float32 data; all
little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .optim import TrainConfig
from .segmenter import SegModel, Vocab
from .tags import Tag, UnitMode
from .transducer import SPECIALS, TransducerModel, TransductionPolicy, TransductionTable

FORMAT_VERSION = "1"
US = "\x1f"


class ModelError(RuntimeError):
    pass


def escape(s):
    return s.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n").replace("\r", "\\r")


def unescape(s):
    out, i = [], 0
    while i < len(s):
        ch = s[i]
        if ch == "\\" and i + 1 < len(s):
            nxt = s[i + 1]
            out.append({"t": "\t", "n": "\n", "r": "\r", "\\": "\\"}.get(nxt, nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def write_params(params, path):
    with open(path, "wb") as f:
        for p in params:
            name = p.name.encode("utf-8")
            f.write(struct.pack("<Q", len(name)))
            f.write(name)
            f.write(struct.pack("<Q", p.data.ndim))
            f.write(struct.pack(f"<{p.data.ndim}Q", *p.data.shape))
            f.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())


def read_params(path):
    out = {}
    data = Path(path).read_bytes()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise ModelError(f"{path}: truncated parameter file")
        chunk = data[pos: pos + n]
        pos += n
        return chunk

    while pos < len(data):
        (n,) = struct.unpack("<Q", take(8))
        name = take(n).decode("utf-8")
        (rank,) = struct.unpack("<Q", take(8))
        dims = struct.unpack(f"<{rank}Q", take(8 * rank)) if rank else ()
        count = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(take(4 * count), dtype="<f4").astype(np.float64).reshape(dims)
        out[name] = arr
    return out


def _assign(params, stored, where):
    for p in params:
        if p.name not in stored:
            raise ModelError(f"{where}: parameter {p.name!r} missing from params.bin")
        arr = stored[p.name]
        if arr.shape != p.data.shape:
            raise ModelError(f"{where}: parameter {p.name!r} has shape {arr.shape}, expected {p.data.shape}")
        p.data = arr.copy()


def save_model(directory, model: SegModel, table=None, policy=None, transducer=None, history=()):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    table = table or TransductionTable()
    policy = policy or TransductionPolicy(False)
    meta = {
        "format_version": FORMAT_VERSION,
        "unit_mode": model.unit_mode.value,
        "uses_ngrams": str(model.uses_ngrams).lower(),
        "tagset": ",".join(t.value for t in model.tagset),
    }
    for o in model.orders:
        meta[f"vocab_size_{o}"] = str(model.vocab.size(o))
    meta["has_encdec"] = str(transducer is not None).lower()
    meta["mwt_unique"] = str(policy.unique_mwts)
    meta["mwt_threshold"] = str(policy.threshold)
    if transducer is not None:
        meta["mwt_symbols"] = str(len(transducer.symbols))
    for k, v in model.cfg.as_dict().items():
        meta[f"config.{k}"] = str(v).lower() if isinstance(v, bool) else str(v)
    with open(d / "meta", "w", encoding="utf-8", newline="\n") as f:
        for k, v in meta.items():
            f.write(f"{k}={v}\n")

    with open(d / "vocab.tsv", "w", encoding="utf-8", newline="\n") as f:
        for o in model.orders:
            for key, idx in sorted(model.vocab.maps[o].items(), key=lambda kv: kv[1]):
                f.write(f"{o}\t{escape(key)}\t{idx}\n")
        if transducer is not None:
            for idx, sym in enumerate(transducer.symbols):
                if idx >= len(SPECIALS):
                    f.write(f"mwt\t{escape(sym)}\t{idx}\n")

    params = list(model.parameters())
    if transducer is not None:
        params += transducer.parameters()
    write_params(params, d / "params.bin")

    with open(d / "mwt.tsv", "w", encoding="utf-8", newline="\n") as f:
        for surface, words in sorted(table.entries.items()):
            f.write(f"{escape(surface)}\t{US.join(escape(w) for w in words)}\n")

    with open(d / "train.log", "w", encoding="utf-8", newline="\n") as f:
        for entry in history:
            f.write("\t".join(f"{k}={v if isinstance(v, str) else repr(v)}" for k, v in entry.items()) + "\n")


def read_meta(directory):
    path = Path(directory) / "meta"
    if not path.exists():
        raise ModelError(f"{path}: model metadata not found")
    meta = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            meta[k] = v
    return meta


def load_model(directory):
    """Returns (SegModel, Transducer-compatible parts: policy, table, transducer or None)."""
    d = Path(directory)
    meta = read_meta(d)
    if meta.get("format_version") != FORMAT_VERSION:
        raise ModelError(f"{d}: unsupported model format version {meta.get('format_version')!r}")
    cfg = TrainConfig.from_dict({k[len("config."):]: v for k, v in meta.items() if k.startswith("config.")})
    uses_ngrams = meta["uses_ngrams"] == "true"
    orders = (1, 2, 3) if uses_ngrams else (1,)
    maps = {o: {} for o in orders}
    symbols = list(SPECIALS)
    try:
        lines = (d / "vocab.tsv").read_text(encoding="utf-8").split("\n")
    except OSError as exc:
        raise ModelError(f"{d / 'vocab.tsv'}: {exc}") from exc
    for line in lines:
        if not line:
            continue
        order, key, idx = line.split("\t")
        if order == "mwt":
            if int(idx) != len(symbols):
                raise ModelError(f"{d}: transducer vocabulary out of order")
            symbols.append(unescape(key))
        else:
            maps[int(order)][unescape(key)] = int(idx)
    vocab = Vocab(maps, {})
    for o in orders:
        if vocab.size(o) != int(meta[f"vocab_size_{o}"]):
            raise ModelError(f"{d}: vocabulary size mismatch for order {o}")
    tagset = [Tag(t) for t in meta["tagset"].split(",")]
    model = SegModel(vocab, tagset, UnitMode(meta["unit_mode"]), uses_ngrams, cfg, np.random.default_rng(0))
    stored = read_params(d / "params.bin")
    _assign(model.parameters(), stored, d)

    transducer = None
    if meta.get("has_encdec") == "true":
        transducer = TransducerModel(symbols, cfg, np.random.default_rng(0))
        _assign(transducer.parameters(), stored, d)

    entries = {}
    mwt_path = d / "mwt.tsv"
    if mwt_path.exists():
        for line in mwt_path.read_text(encoding="utf-8").split("\n"):
            if line:
                surface, comps = line.split("\t")
                entries[unescape(surface)] = tuple(unescape(c) for c in comps.split(US))
    table = TransductionTable(entries, {})
    policy = TransductionPolicy(
        transducer is not None, int(meta.get("mwt_unique", 0)), int(meta.get("mwt_threshold", 200))
    )
    return model, policy, table, transducer

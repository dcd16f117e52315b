"""CoNLL-U reading and writing.

Only ID, FORM and the SpaceAfter flag in MISC are interpreted.  Every row is
kept verbatim so documents can be re-emitted unchanged.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

NUM_COLUMNS = 10
_RANGE = re.compile(r"^(\d+)-(\d+)$")
_EMPTY = re.compile(r"^\d+\.\d+$")
_WORD = re.compile(r"^\d+$")


class ConlluError(ValueError):
    """Malformed or structurally invalid CoNLL-U input."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Token:
    """A surface token: a plain word line or a multiword range line."""

    id_start: int
    id_end: int
    form: str
    space_after: bool = True
    words: tuple[str, ...] = ()

    def __post_init__(self):
        if self.id_end < self.id_start:
            raise ValueError("id_end must be >= id_start")
        if not self.form:
            raise ValueError("token form must be non-empty")
        if not self.words:
            object.__setattr__(self, "words", (self.form,))

    @property
    def is_multiword_range(self):
        return self.id_end > self.id_start

    @property
    def is_segmental(self):
        """True unless this is a range whose words do not spell its surface."""
        return "".join(self.words) == self.form


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    words: tuple[str, ...]
    raw_text: str | None = None
    comments: tuple[str, ...] = ()
    rows: tuple[tuple[str, ...], ...] = field(default=(), compare=True)

    @property
    def text(self):
        return reconstruct_text(self)


@dataclass(frozen=True)
class Document:
    sentences: tuple[Sentence, ...] = ()
    source_name: str = ""
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)


def join_tokens(tokens):
    """Concatenate forms with one space after every token flagged space_after (not after the last)."""
    parts = []
    for i, tok in enumerate(tokens):
        parts.append(tok.form)
        if tok.space_after and i < len(tokens) - 1:
            parts.append(" ")
    return "".join(parts)


def reconstruct_text(sentence: Sentence):
    if sentence.raw_text:
        return sentence.raw_text
    return join_tokens(sentence.tokens)


def _space_after(misc):
    return "SpaceAfter=No" not in misc.split("|")


def _build_sentence(rows, comments, first_line):
    """Turn the rows of one sentence block into a Sentence, validating id structure."""
    tokens = []
    words = []
    next_word = 1
    pending = None  # (start, end, form, space_after, collected words)
    for offset, cols in enumerate(rows):
        lineno = first_line + offset
        ident = cols[0]
        if _EMPTY.match(ident):
            continue
        m = _RANGE.match(ident)
        if m:
            start, end = int(m.group(1)), int(m.group(2))
            if pending is not None:
                raise ConlluError(f"range {ident} overlaps range {pending[0]}-{pending[1]}", lineno)
            if end <= start:
                raise ConlluError(f"invalid range {ident}", lineno)
            if start != next_word:
                raise ConlluError(f"range {ident} does not start at word {next_word}", lineno)
            pending = (start, end, cols[1], _space_after(cols[9]), [])
            continue
        if not _WORD.match(ident):
            raise ConlluError(f"invalid ID {ident!r}", lineno)
        wid = int(ident)
        if wid != next_word:
            raise ConlluError(f"word id {wid} out of order, expected {next_word}", lineno)
        next_word += 1
        words.append(cols[1])
        if pending is not None:
            pending[4].append(cols[1])
            if wid == pending[1]:
                start, end, form, space, covered = pending
                tokens.append(Token(start, end, form, space, tuple(covered)))
                pending = None
        else:
            tokens.append(Token(wid, wid, cols[1], _space_after(cols[9])))
    if pending is not None:
        raise ConlluError(
            f"range {pending[0]}-{pending[1]} is missing covered word ids", first_line + len(rows) - 1
        )
    text = None
    for c in comments:
        body = c[1:].strip()
        if body.startswith("text =") or body.startswith("text="):
            text = body.split("=", 1)[1].strip()
    rebuilt = join_tokens(tokens)
    warning = None
    if text is None:
        text = rebuilt
    elif text != rebuilt:
        warning = f"line {first_line}: '# text' disagrees with forms/SpaceAfter; using '# text'"
    return Sentence(tuple(tokens), tuple(words), text, tuple(comments), tuple(rows)), warning


def parse_document(stream, source_name=""):
    """Parse CoNLL-U text (a string or an iterable of lines)."""
    if isinstance(stream, str):
        lines = stream.split("\n")
    else:
        lines = list(stream)
    sentences = []
    warnings = []
    comments, rows, first = [], [], None

    def flush(lineno):
        nonlocal comments, rows, first
        if rows:
            sent, warning = _build_sentence(rows, comments, first)
            sentences.append(sent)
            if warning:
                log.warning("%s: %s", source_name or "<input>", warning)
                warnings.append(warning)
        elif comments:
            raise ConlluError("comment block without token lines", lineno)
        comments, rows, first = [], [], None

    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            flush(lineno)
            continue
        if line.startswith("#"):
            if rows:
                raise ConlluError("comment inside a sentence", lineno)
            comments.append(line)
            continue
        cols = line.split("\t")
        if len(cols) != NUM_COLUMNS:
            raise ConlluError(f"expected {NUM_COLUMNS} tab-separated columns, found {len(cols)}", lineno)
        if not cols[1]:
            raise ConlluError("empty FORM", lineno)
        if first is None:
            first = lineno
        rows.append(tuple(cols))
    flush(len(lines))
    return Document(tuple(sentences), source_name, tuple(warnings))


def read_conllu(path):
    with open(path, encoding="utf-8") as f:
        return parse_document(f.read(), source_name=str(path))


def serialize_document(doc: Document):
    out = []
    for sent in doc.sentences:
        out.extend(sent.comments)
        out.extend("\t".join(cols) for cols in sent.rows)
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


def write_conllu(doc, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(serialize_document(doc))


def _row(ident, form, space_after):
    misc = "_" if space_after else "SpaceAfter=No"
    return (ident, form, "_", "_", "_", "_", "_", "_", "_", misc)


def build_sentence(text, pieces, comments=()):
    """Assemble a Sentence from segmenter output.

    ``pieces`` is a list of (start, end, surface, words) in text order, where
    start/end are character offsets and ``words`` is the list of syntactic
    words (more than one means a multiword token).  SpaceAfter=No is set when
    the next character after a token is not whitespace.
    """
    rows, tokens, words = [], [], []
    wid = 1
    for i, (start, end, surface, parts) in enumerate(pieces):
        last = i == len(pieces) - 1
        space = last or (end < len(text) and text[end].isspace())
        parts = tuple(parts) or (surface,)
        if len(parts) > 1:
            span = f"{wid}-{wid + len(parts) - 1}"
            rows.append(_row(span, surface, space))
            for w in parts:
                rows.append(_row(str(wid), w, True))
                wid += 1
            tokens.append(Token(wid - len(parts), wid - 1, surface, space, parts))
        else:
            # a one-word "transduction" is not a multiword token; keep the surface
            parts = (surface,)
            rows.append(_row(str(wid), surface, space))
            tokens.append(Token(wid, wid, surface, space))
            wid += 1
        words.extend(parts)
    kept = [c for c in comments if not c[1:].strip().startswith("text")]
    kept.append(f"# text = {text}")
    return Sentence(tuple(tokens), tuple(words), text, tuple(kept), tuple(rows))

"""Boundary tags over character or syllable units, and the gold <-> tag conversions."""

from __future__ import annotations

import enum
import unicodedata
from dataclasses import dataclass

from .conllu import Sentence, reconstruct_text


class Tag(str, enum.Enum):
    B = "B"
    I = "I"  # noqa: E741
    E = "E"
    S = "S"
    X = "X"
    B_ = "B*"
    I_ = "I*"
    E_ = "E*"
    S_ = "S*"

    @property
    def overlined(self):
        return self.value.endswith("*")

    @property
    def base(self):
        return self.value[0]

    def display(self):
        """Letter with a combining macron for the multiword-token variants."""
        return self.base + "̄" if self.overlined else self.value


PLAIN_TAGSET = (Tag.B, Tag.I, Tag.E, Tag.S, Tag.X)
FULL_TAGSET = PLAIN_TAGSET + (Tag.B_, Tag.I_, Tag.E_, Tag.S_)

_BY_BASE = {(t.base, t.overlined): t for t in FULL_TAGSET}


def _variant(base, overlined):
    return _BY_BASE[(base, overlined)]


class UnitMode(str, enum.Enum):
    CHARACTER = "character"
    SYLLABLE = "syllable"


class EncodeError(ValueError):
    pass


@dataclass(frozen=True)
class UnitSequence:
    text: str
    units: tuple[str, ...]
    offsets: tuple[tuple[int, int], ...]
    mode: UnitMode

    def __len__(self):
        return len(self.units)

    def surface(self, first, last):
        """Raw text covered by units first..last inclusive."""
        return self.text[self.offsets[first][0]: self.offsets[last][1]]


def _is_punct(ch):
    return unicodedata.category(ch).startswith("P")


def unitize(raw_text, mode=UnitMode.CHARACTER):
    mode = UnitMode(mode)
    units, offsets = [], []
    if mode is UnitMode.CHARACTER:
        for i, ch in enumerate(raw_text):
            units.append(ch)
            offsets.append((i, i + 1))
        return UnitSequence(raw_text, tuple(units), tuple(offsets), mode)

    i, n = 0, len(raw_text)
    while i < n:
        if raw_text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not raw_text[j].isspace():
            j += 1
        # peel leading and trailing punctuation off the whitespace segment
        lead = i
        while lead < j and _is_punct(raw_text[lead]):
            lead += 1
        trail = j
        while trail > lead and _is_punct(raw_text[trail - 1]):
            trail -= 1
        for k in range(i, lead):
            units.append(raw_text[k])
            offsets.append((k, k + 1))
        if lead < trail:
            units.append(raw_text[lead:trail])
            offsets.append((lead, trail))
        for k in range(trail, j):
            units.append(raw_text[k])
            offsets.append((k, k + 1))
        i = j
    return UnitSequence(raw_text, tuple(units), tuple(offsets), mode)


def _token_spans(sentence, text):
    """Locate each token in the text; returns [(start, end, token)].

    Characters skipped between tokens are later tagged X.
    """
    spans = []
    pos = 0
    for tok in sentence.tokens:
        if text.startswith(tok.form, pos):
            start = pos
        else:
            start = text.find(tok.form, pos)
            if start < 0:
                raise EncodeError(f"token {tok.form!r} (id {tok.id_start}) not found in text {text!r} after offset {pos}")
        end = start + len(tok.form)
        spans.append((start, end, tok))
        pos = end
    return spans


def encode_tags(sentence: Sentence, units: UnitSequence | None = None, mode=UnitMode.CHARACTER):
    """Gold tags for each unit of the sentence's raw text."""
    text = reconstruct_text(sentence)
    if units is None:
        units = unitize(text, mode)
    elif units.text != text:
        raise EncodeError("units were built from a different text than the sentence")
    # char offset -> unit index (start positions only)
    unit_at = {start: k for k, (start, _) in enumerate(units.offsets)}
    tags = [Tag.X] * len(units)

    def tag_span(start, end, overlined, what):
        covered = []
        k = unit_at.get(start)
        if k is None:
            raise EncodeError(f"{what} does not begin on a unit boundary in {text!r}")
        while k < len(units) and units.offsets[k][1] <= end:
            covered.append(k)
            k += 1
        if not covered or units.offsets[covered[-1]][1] != end:
            raise EncodeError(f"{what} does not end on a unit boundary in {text!r}")
        if len(covered) == 1:
            tags[covered[0]] = _variant("S", overlined)
            return
        tags[covered[0]] = _variant("B", overlined)
        for c in covered[1:-1]:
            tags[c] = _variant("I", overlined)
        tags[covered[-1]] = _variant("E", overlined)

    for start, end, tok in _token_spans(sentence, text):
        label = f"token {tok.form!r} (id {tok.id_start})"
        if tok.is_multiword_range and not tok.is_segmental:
            tag_span(start, end, True, label)
            continue
        pos = start
        for w in tok.words:
            tag_span(pos, pos + len(w), False, label)
            pos += len(w)
    return tuple(tags)


def repair_tags(tags):
    """Left-to-right repair into a well-formed span sequence.

    I/E without an open span start one (as B/S); a span left open before X,
    before a new start, before an alphabet switch, or at the end is closed by
    rewriting its last tag.
    """
    out = [Tag(t) for t in tags]
    open_alpha = None  # None, False (plain) or True (overlined)

    def close(i):
        prev = out[i - 1]
        out[i - 1] = _variant("S" if prev.base == "B" else "E", prev.overlined)

    for i, t in enumerate(out):
        if t is Tag.X:
            if open_alpha is not None:
                close(i)
            open_alpha = None
            continue
        alpha, base = t.overlined, t.base
        if open_alpha is not None and alpha != open_alpha:
            close(i)
            open_alpha = None
        if base == "B":
            if open_alpha is not None:
                close(i)
            open_alpha = alpha
        elif base == "I":
            if open_alpha is None:
                out[i] = _variant("B", alpha)
                open_alpha = alpha
        elif base == "E":
            if open_alpha is None:
                out[i] = _variant("S", alpha)
            open_alpha = None
        else:  # S
            if open_alpha is not None:
                close(i)
            open_alpha = None
    if open_alpha is not None:
        close(len(out))
    return tuple(out)


@dataclass(frozen=True)
class Span:
    first: int  # unit indices, inclusive
    last: int
    start: int  # character offsets
    end: int
    text: str
    multiword: bool


@dataclass(frozen=True)
class Decoding:
    spans: tuple[Span, ...]

    @property
    def words(self):
        return [s.text for s in self.spans if not s.multiword]

    @property
    def mwt_spans(self):
        return [s.text for s in self.spans if s.multiword]

    @property
    def surfaces(self):
        return [s.text for s in self.spans]


def decode_tags(units: UnitSequence, tags):
    if len(units) != len(tags):
        raise ValueError(f"{len(units)} units but {len(tags)} tags")
    tags = repair_tags(tags)
    spans = []
    begin = None
    for i, t in enumerate(tags):
        if t is Tag.X:
            continue
        if t.base in "BS":
            begin = i
        if t.base in "ES":
            start, end = units.offsets[begin][0], units.offsets[i][1]
            spans.append(Span(begin, i, start, end, units.text[start:end], t.overlined))
            begin = None
    return Decoding(tuple(spans))


def tags_to_string(tags):
    return "".join(Tag(t).display() for t in tags)


def write_debug(pairs, stream):
    """Write ``unit<TAB>tag`` lines, a blank line after each sentence."""
    for units, tags in pairs:
        for u, t in zip(units.units, tags):
            stream.write(f"{u}\t{Tag(t).value}\n")
        stream.write("\n")


def read_debug(stream):
    """Inverse of write_debug: yields (units, tags) lists per sentence."""
    units, tags = [], []
    for line in stream:
        line = line.rstrip("\n")
        if not line:
            if units:
                yield units, tags
            units, tags = [], []
            continue
        u, t = line.rsplit("\t", 1)
        units.append(u)
        tags.append(Tag(t))
    if units:
        yield units, tags

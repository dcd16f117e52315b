import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from udseg.modelio import ModelError, escape, load_model, read_params, save_model, unescape
from udseg.optim import TrainConfig
from udseg.segmenter import new_model, predict
from udseg.synthetic import toy_split
from udseg.transducer import TransducerModel, TransductionPolicy, build_table

CFG = TrainConfig(char_embedding_size=4, rnn_state_size=5)


@pytest.fixture(scope="module")
def spaced():
    train, test, _, _ = toy_split(5, spaced=True, n_train=60, n_test=5, n_stems=30)
    return train, test


@pytest.fixture
def saved(tmp_path, spaced):
    train, _ = spaced
    model = new_model(train.sentences, uses_ngrams=True, cfg=CFG)
    table = build_table(train.sentences)
    encdec = TransducerModel.for_pairs(sorted(table.entries.items()), CFG, np.random.default_rng(0))
    policy = TransductionPolicy(True, len(table), 20)
    save_model(tmp_path / "m", model, table, policy, encdec, [{"stage": "main", "epoch": 1, "dev_f1": 0.5}])
    return tmp_path / "m", model, table, encdec


class TestEscape:
    @given(st.text())
    def test_roundtrip(self, s):
        e = escape(s)
        assert "\t" not in e and "\n" not in e
        assert unescape(e) == s


class TestLayout:
    def test_files(self, saved):
        d, *_ = saved
        assert sorted(p.name for p in d.iterdir()) == ["meta", "mwt.tsv", "params.bin", "train.log", "vocab.tsv"]
        meta = dict(line.split("=", 1) for line in (d / "meta").read_text().splitlines())
        assert meta["format_version"] == "1"
        assert meta["tagset"] == "B,I,E,S,X,B*,I*,E*,S*"
        assert meta["uses_ngrams"] == "true" and meta["has_encdec"] == "true"
        assert meta["config.rnn_state_size"] == "5"
        assert (d / "train.log").read_text() == "stage=main\tepoch=1\tdev_f1=0.5\n"

    def test_params_binary_format(self, saved):
        d, model, _, encdec = saved
        data = (d / "params.bin").read_bytes()
        (n,) = struct.unpack_from("<Q", data, 0)
        assert data[8: 8 + n].decode() == "emb1"
        rank, d0, d1 = struct.unpack_from("<3Q", data, 8 + n)
        assert (rank, d0, d1) == (2, model.vocab.size(1), 4)
        first = np.frombuffer(data, "<f4", count=d0 * d1, offset=8 + n + 24)
        np.testing.assert_array_equal(first, model.embeddings[1].data.astype(np.float32).ravel())
        names = list(read_params(d / "params.bin"))
        assert names == [p.name for p in model.parameters()] + [p.name for p in encdec.parameters()]
        assert all(n.startswith("mwt.") for n in names[len(model.parameters()):])

    def test_mwt_table(self, saved):
        d, _, table, _ = saved
        lines = (d / "mwt.tsv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == len(table)
        surface, comps = lines[0].split("\t")
        assert tuple(comps.split("\x1f")) == table.get(surface)


class TestLoad:
    def test_roundtrip(self, saved, spaced):
        d, model, table, encdec = saved
        m2, policy, table2, enc2 = load_model(d)
        assert table2.entries == table.entries
        assert policy.has_encdec and policy.threshold == 20
        assert m2.vocab.maps == model.vocab.maps
        assert m2.tagset == model.tagset and m2.cfg == model.cfg
        for a, b in zip(model.parameters(), m2.parameters()):
            np.testing.assert_array_equal(b.data, a.data.astype(np.float32))
        assert enc2.symbols == encdec.symbols
        texts = [s.text for s in spaced[1].sentences]
        assert [p.words for p in predict(m2, texts)] == [p.words for p in predict(model, texts)]

    def test_version_mismatch(self, saved):
        d, *_ = saved
        meta = (d / "meta").read_text().replace("format_version=1", "format_version=2")
        (d / "meta").write_text(meta)
        with pytest.raises(ModelError, match="version"):
            load_model(d)

    def test_missing(self, tmp_path):
        with pytest.raises(ModelError):
            load_model(tmp_path / "nothing")

    def test_truncated(self, saved):
        d, *_ = saved
        data = (d / "params.bin").read_bytes()
        (d / "params.bin").write_bytes(data[:-3])
        with pytest.raises(ModelError):
            load_model(d)

    def test_shape_mismatch(self, saved):
        d, *_ = saved
        meta = (d / "meta").read_text().replace("config.rnn_state_size=5", "config.rnn_state_size=6")
        (d / "meta").write_text(meta)
        with pytest.raises(ModelError, match="shape"):
            load_model(d)

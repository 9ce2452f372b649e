import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nqtforge.embeddings import (
    RESERVED, EmbeddingSet, Vocab, align_pretrained, load_pretrained, ner_segment_ids, save_pretrained,
)

KINDS = ("BiLSTM", "ConvS2S", "Transformer", "MHC")


def test_segment_ids_example():
    assert ner_segment_ids(["How", "many", "movies", "did", "NER", "direct"]) == [0, 0, 0, 0, 1, 0]


def test_segment_ids_none_and_two():
    assert ner_segment_ids(["a", "b"]) == [0, 0]
    assert ner_segment_ids(["is", "NER", "of", "NER"]) == [0, 1, 0, 2]


def test_segment_ids_overflow():
    with pytest.raises(ValueError):
        ner_segment_ids(["NER"] * 3, s_max=2)


@given(st.lists(st.sampled_from(["NER", "a", "b", "c"]), max_size=10), st.randoms())
def test_segment_ids_ignore_other_tokens(tokens, rnd):
    others = [t for t in tokens if t != "NER"]
    rnd.shuffle(others)
    it = iter(others)
    permuted = [t if t == "NER" else next(it) for t in tokens]
    assert ner_segment_ids(permuted) == ner_segment_ids(tokens)
    assert [i for i in ner_segment_ids(tokens) if i] == list(range(1, tokens.count("NER") + 1))


def table(positional=True):
    return EmbeddingSet(20, 6, np.random.default_rng(0), positional=positional)


def test_bilstm_embed_is_word_plus_segment():
    emb = table()
    ids, segs = np.array([[4, 9, 10]]), np.array([[1, 0, 0]])
    out = emb.embed(ids, segs, "BiLSTM").data
    ref = emb.word.data[ids] + emb.ner_segment.data[segs]
    np.testing.assert_array_equal(out, ref)


def test_all_zero_segments_add_row_zero():
    emb = table()
    ids = np.array([5, 6])
    out = emb.embed(ids, [0, 0], "MHC").data
    np.testing.assert_array_equal(out, emb.word.data[ids] + emb.ner_segment.data[0])


def test_transformer_positions_differ_only_by_positional_rows():
    emb = table()
    out = emb.embed(np.array([7, 7, 7]), [0, 0, 0], "Transformer").data
    for p in range(3):
        for q in range(3):
            np.testing.assert_allclose(out[p] - out[q], emb.positional.data[p] - emb.positional.data[q],
                                       atol=1e-15)


@pytest.mark.parametrize("kind", KINDS)
def test_embed_shape(kind):
    out = table().embed(np.zeros((2, 5), dtype=int), np.zeros((2, 5), dtype=int), kind)
    assert out.shape == (2, 5, 6)


def test_positional_kind_without_table():
    with pytest.raises(ValueError):
        table(positional=False).embed(np.array([1]), [0], "ConvS2S")


def test_sequence_longer_than_l_max():
    emb = EmbeddingSet(5, 4, np.random.default_rng(0), l_max=3)
    with pytest.raises(ValueError):
        emb.embed(np.zeros(4, dtype=int), [0] * 4, "MHC")


def test_load_pretrained_three_lines(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("film 0.1 0.2\ndirector 0.3 0.4\nNER 1 1\n")
    vocab, matrix = load_pretrained(path)
    # NER is reserved, so only two new tokens, with its row taken from the file
    assert len(vocab) == len(RESERVED) + 2
    np.testing.assert_array_equal(matrix[vocab.stoi["NER"]], [1.0, 1.0])
    path.write_text("film 0.1 0.2\nbook 0.3 0.4\nbook 0.5 0.6\n")
    with pytest.raises(ValueError, match="duplicate"):
        load_pretrained(path)


def test_load_pretrained_counts_new_tokens(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("film 0.1 0.2\ndirector 0.3 0.4\nbook 0.5 0.6\n")
    vocab, _ = load_pretrained(path)
    assert len(vocab) == 3 + len(RESERVED)


def test_load_pretrained_ragged(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("film 0.1 0.2\nbook 0.3\n")
    with pytest.raises(ValueError):
        load_pretrained(path)


def test_pretrained_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(5)
    vocab = Vocab(["alpha", "beta", "gamma"])
    matrix = rng.normal(size=(len(vocab), 4))
    save_pretrained(tmp_path / "v.txt", vocab, matrix)
    vocab2, matrix2 = load_pretrained(tmp_path / "v.txt")
    assert vocab2 == vocab
    assert np.array_equal(matrix2, matrix)


def test_align_pretrained():
    pre = Vocab(["film"])
    matrix = np.arange(len(pre) * 3, dtype=float).reshape(len(pre), 3)
    vocab = Vocab(["book", "film"])
    out = align_pretrained(vocab, pre, matrix, 3)
    np.testing.assert_array_equal(out[vocab.stoi["film"]], matrix[pre.stoi["film"]])
    with pytest.raises(ValueError):
        align_pretrained(vocab, pre, matrix, 4)


def test_vocab_round_trip(tmp_path):
    vocab = Vocab.build([["b", "a", "b"], ["c"]])
    assert vocab.itos[len(RESERVED):] == ["b", "a", "c"]
    vocab.save(tmp_path / "v")
    assert Vocab.load(tmp_path / "v") == vocab
    assert vocab.encode(["zzz"]) == [vocab.unk_id]

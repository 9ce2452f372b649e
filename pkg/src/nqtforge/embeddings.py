"""Vocabulary and the word / positional / NER-segment embedding tables."""
from __future__ import annotations

from collections import Counter
from pathlib import Path

import numpy as np

from .tensor import Parameter, embedding_lookup

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<bos>", "<eos>"
RESERVED = (PAD, UNK, BOS, EOS, "NER", "NER1", "NER2", "[sep]", "[sep_end]")

L_MAX = 64
S_MAX = 8

POSITIONAL_KINDS = frozenset({"Transformer", "ConvS2S"})


class Vocab:
    """Dense token ids; the reserved tokens always occupy ids 0..8."""

    def __init__(self, tokens=()):
        self.itos = list(RESERVED)
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        for tok in tokens:
            self.add(tok)

    def add(self, token):
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    @classmethod
    def build(cls, sequences, min_freq=1):
        counts = Counter(tok for seq in sequences for tok in seq)
        ordered = sorted((t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t))
        return cls(ordered)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.itos == other.itos

    @property
    def pad_id(self):
        return 0

    @property
    def unk_id(self):
        return 1

    @property
    def bos_id(self):
        return 2

    @property
    def eos_id(self):
        return 3

    def encode(self, tokens):
        return [self.stoi.get(t, self.unk_id) for t in tokens]

    def decode(self, ids):
        return [self.itos[i] for i in ids]

    def save(self, path):
        Path(path).write_text("\n".join(self.itos) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        itos = Path(path).read_text(encoding="utf-8").splitlines()
        if tuple(itos[: len(RESERVED)]) != RESERVED:
            raise ValueError(f"{path}: vocabulary does not start with the reserved tokens")
        return cls(itos[len(RESERVED):])


def ner_segment_ids(tokens, s_max=S_MAX):
    """1-based occurrence index for every literal ``NER`` token, 0 elsewhere."""
    out, k = [], 0
    for tok in tokens:
        if tok == "NER":
            k += 1
            if k > s_max:
                raise ValueError(f"more than {s_max} NER slots in one question")
            out.append(k)
        else:
            out.append(0)
    return out


class EmbeddingSet:
    """Word, optional positional and NER-segment tables sharing ``d_model``.

    The three lookups are summed; positional rows are only added for the
    encoders that need them (Transformer and ConvS2S).
    """

    def __init__(self, vocab_size, d_model, rng, positional=True, l_max=L_MAX, s_max=S_MAX,
                 word_init=None, prefix="emb"):
        scale = d_model ** -0.5
        if word_init is not None:
            word_init = np.asarray(word_init, dtype=np.float64)
            if word_init.shape != (vocab_size, d_model):
                raise ValueError(f"pretrained matrix {word_init.shape} != {(vocab_size, d_model)}")
            self.word = Parameter(word_init.copy(), f"{prefix}.word")
        else:
            self.word = Parameter(rng.normal(0.0, scale, (vocab_size, d_model)), f"{prefix}.word")
        self.positional = Parameter(rng.normal(0.0, scale, (l_max, d_model)), f"{prefix}.pos") if positional else None
        self.ner_segment = Parameter(rng.normal(0.0, scale, (s_max + 1, d_model)), f"{prefix}.seg")
        self.d_model = d_model
        self.l_max = l_max

    def parameters(self):
        return [p for p in (self.word, self.positional, self.ner_segment) if p is not None]

    def embed(self, ids, segment_ids, encoder_kind):
        ids = np.asarray(ids)
        m = ids.shape[-1]
        if m > self.l_max:
            raise ValueError(f"sequence of length {m} exceeds L_max={self.l_max}")
        out = embedding_lookup(self.word, ids) + embedding_lookup(self.ner_segment, np.asarray(segment_ids))
        if encoder_kind in POSITIONAL_KINDS:
            if self.positional is None:
                raise ValueError(f"{encoder_kind} needs positional embeddings")
            out = out + embedding_lookup(self.positional, np.arange(m))
        return out


def load_pretrained(path, seed=0, scale=0.01):
    """Read ``token v1 ... vd`` lines into a vocabulary and matrix.

    Reserved tokens missing from the file get small random rows.
    """
    rows, dim = {}, None
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        token, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
        if len(values) != dim or dim == 0:
            raise ValueError(f"{path}:{lineno}: expected {dim} values, got {len(values)}")
        if token in rows:
            raise ValueError(f"{path}:{lineno}: duplicate token {token!r}")
        rows[token] = np.array([float(v) for v in values])
    if dim is None:
        raise ValueError(f"{path}: no vectors")
    vocab = Vocab(t for t in rows if t not in RESERVED)
    rng = np.random.default_rng(seed)
    matrix = np.empty((len(vocab), dim))
    for i, tok in enumerate(vocab.itos):
        matrix[i] = rows[tok] if tok in rows else rng.normal(0.0, scale, dim)
    return vocab, matrix


def save_pretrained(path, vocab, matrix):
    lines = [" ".join([tok] + [repr(float(v)) for v in row]) for tok, row in zip(vocab.itos, matrix)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def align_pretrained(vocab, pre_vocab, matrix, d_model, seed=0, scale=None):
    """Matrix for ``vocab`` taking rows from a pretrained table where tokens overlap."""
    if matrix.shape[1] != d_model:
        raise ValueError(f"pretrained dimension {matrix.shape[1]} != d_model {d_model}")
    rng = np.random.default_rng(seed)
    scale = d_model ** -0.5 if scale is None else scale
    out = rng.normal(0.0, scale, (len(vocab), d_model))
    for i, tok in enumerate(vocab.itos):
        j = pre_vocab.stoi.get(tok)
        if j is not None:
            out[i] = matrix[j]
    return out

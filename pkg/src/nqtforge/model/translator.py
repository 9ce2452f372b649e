"""Question -> NQT translator with a scikit-learn style interface."""
from __future__ import annotations

import logging
import math
import time

import numpy as np
from sklearn.base import BaseEstimator

from .. import tensor as T
from ..embeddings import Vocab, align_pretrained, load_pretrained
from ..nqt import Nqt, NqtParseError, nqt_tokens, parse_nqt, separators
from .config import ModelConfig
from .seq2seq import Seq2Seq

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


def _as_tokens(x):
    return x.split() if isinstance(x, str) else list(x)


class NqtTranslator(BaseEstimator):
    """Encoder-decoder that maps NER-substituted question tokens to NQT.

    ``X`` is a sequence of token lists (or whitespace-joined strings).
    ``y`` holds :class:`Nqt` objects or already serialized token lists.
    """

    def __init__(self, encoder="MHC", attention="MHA", n_layers=2, d_model=64, heads=4, kernel=3,
                 max_target_len=48, scale_scores=True, dropout=0.0, learning_rate=1e-3, batch_size=32,
                 epochs=30, separator="sep", seed=0, pretrained=None, clip=5.0, verbose=False):
        self.encoder = encoder
        self.attention = attention
        self.n_layers = n_layers
        self.d_model = d_model
        self.heads = heads
        self.kernel = kernel
        self.max_target_len = max_target_len
        self.scale_scores = scale_scores
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.separator = separator
        self.seed = seed
        self.pretrained = pretrained
        self.clip = clip
        self.verbose = verbose

    def model_config(self):
        return ModelConfig(self.encoder, self.attention, self.n_layers, self.d_model, self.heads,
                           self.kernel, self.max_target_len, self.scale_scores, self.seed)

    def _targets(self, y):
        separators(self.separator)
        out = []
        for item in y:
            out.append(nqt_tokens(item, self.separator) if isinstance(item, Nqt) else _as_tokens(item))
        return out

    def fit(self, X, y, X_val=None, y_val=None, on_epoch=None):
        sources = [_as_tokens(x) for x in X]
        targets = self._targets(y)
        if not sources:
            raise ValueError("cannot fit on an empty dataset")
        if len(sources) != len(targets):
            raise ValueError(f"{len(sources)} questions but {len(targets)} targets")
        if any(len(t) + 1 > self.max_target_len for t in targets):
            longest = max(len(t) for t in targets)
            raise ValueError(f"target of {longest} tokens exceeds max_target_len={self.max_target_len}")
        cfg = self.model_config()
        self.vocab_ = Vocab.build(sources + targets)
        word_init = None
        if self.pretrained:
            pre_vocab, matrix = load_pretrained(self.pretrained, seed=self.seed)
            word_init = align_pretrained(self.vocab_, pre_vocab, matrix, self.d_model, seed=self.seed)
        self.model_ = Seq2Seq(cfg, len(self.vocab_), word_init)
        params = self.model_.parameters()
        opt = T.Adam(params, lr=self.learning_rate, clip=self.clip)
        rng = np.random.default_rng(self.seed)
        self.history_ = []
        n = len(sources)
        for epoch in range(1, self.epochs + 1):
            start = time.perf_counter()
            order = rng.permutation(n)
            total, batches = 0.0, 0
            for lo in range(0, n, self.batch_size):
                idx = order[lo: lo + self.batch_size]
                opt.zero_grad()
                loss = self.model_.loss([sources[i] for i in idx], [targets[i] for i in idx], self.vocab_)
                value = loss.item()
                if not math.isfinite(value):
                    raise TrainingDiverged(
                        f"non-finite loss {value} at epoch {epoch}, batch {batches + 1}; "
                        f"grad norm {opt.grad_norm():.3g}, lr {self.learning_rate}")
                loss.backward()
                opt.step()
                total += value
                batches += 1
            row = {"epoch": epoch, "loss": total / batches, "val_exact_match": float("nan")}
            if X_val is not None and y_val is not None:
                row["val_exact_match"] = self.token_accuracy(X_val, y_val)
            self.history_.append(row)
            if self.verbose:
                log.info("epoch %d loss %.4f val_em %.4f (%.1fs)", epoch, row["loss"],
                         row["val_exact_match"], time.perf_counter() - start)
            if on_epoch is not None:
                on_epoch(row)
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("NqtTranslator is not fitted; call fit() or load() first")

    def predict_tokens(self, X, batch_size=None):
        """Decoded token lists plus a flag per item marking T_max truncation."""
        self._check_fitted()
        sources = [_as_tokens(x) for x in X]
        step = batch_size or max(self.batch_size, 64)
        tokens, truncated = [], []
        for lo in range(0, len(sources), step):
            tok, trunc = self.model_.greedy_decode(sources[lo: lo + step], self.vocab_)
            tokens.extend(tok)
            truncated.extend(trunc)
        return tokens, truncated

    def predict(self, X):
        """Parsed NQT per question, ``None`` where nothing could be salvaged."""
        tokens, _ = self.predict_tokens(X)
        out = []
        for tok in tokens:
            try:
                out.append(parse_nqt(tok, lenient=True, style=self.separator)[0])
            except NqtParseError:
                out.append(None)
        return out

    def token_accuracy(self, X, y):
        """Fraction of sequences decoded to exactly the target token list."""
        predicted, _ = self.predict_tokens(X)
        targets = self._targets(y)
        return float(np.mean([p == t for p, t in zip(predicted, targets)])) if targets else 0.0

    def save(self, path):
        self._check_fitted()
        header = {"params": self.get_params(), "vocab": self.vocab_.itos, "history": self.history_}
        T.save_parameters(path, {p.name: p for p in self.model_.parameters()}, header)

    @classmethod
    def load(cls, path):
        header, arrays = T.load_parameters(path)
        est = cls(**header["params"])
        vocab = Vocab(header["vocab"][len(Vocab().itos):])
        model = Seq2Seq(est.model_config(), len(vocab))
        named = {p.name: p for p in model.parameters()}
        missing = set(named) ^ set(arrays)
        if missing:
            raise ValueError(f"{path}: checkpoint and model disagree on parameters {sorted(missing)[:5]}")
        for name, p in named.items():
            if p.data.shape != arrays[name].shape:
                raise ValueError(f"{path}: shape mismatch for {name}")
            p.data[...] = arrays[name]
        est.vocab_, est.model_, est.history_ = vocab, model, header.get("history", [])
        return est

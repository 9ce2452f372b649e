"""LSTM decoder with cross-attention, and the encoder-decoder wrapper."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import tensor as T
from ..embeddings import POSITIONAL_KINDS, EmbeddingSet, ner_segment_ids
from ..tensor import Parameter, Tensor
from .attention import CrossAttention
from .config import ModelConfig
from .encoders import EncoderOutput, build_encoder
from .layers import LSTM, AddNorm, Linear, Module


class StepOverflow(RuntimeError):
    pass


@dataclass
class DecoderState:
    h: list
    c: list
    q: list = field(default_factory=list)
    g: Tensor | None = None
    step: int = 0


@dataclass
class AttentionTrace:
    """Per decoder layer weights ``[B, (h,) T, M]`` from the last pass."""

    layers: list

    def rows_sum_to_one(self, tol=1e-9):
        return all(np.allclose(w.sum(axis=-1), 1.0, atol=tol, rtol=0) and (w >= 0).all() for w in self.layers)


class LSTMDecoder(Module):
    def __init__(self, cfg: ModelConfig, vocab_size, rng):
        d = cfg.d_model
        self.cfg = cfg
        self.embedding = Parameter(rng.normal(0.0, d ** -0.5, (vocab_size, d)), "dec.emb")
        self.lstms = [LSTM(d, d, rng, f"dec.{i}.lstm") for i in range(cfg.n_layers)]
        self.q_norms = [AddNorm(d, f"dec.{i}.qn") for i in range(cfg.n_layers)]
        self.attns = [CrossAttention(cfg.attention_kind, d, rng, f"dec.{i}.att", cfg.heads, cfg.scale_scores)
                      for i in range(cfg.n_layers)]
        self.c_norms = [AddNorm(d, f"dec.{i}.cn") for i in range(cfg.n_layers)]
        # small output weights keep the initial loss near ln|V|
        self.out = Linear(d, vocab_size, rng, "dec.out", scale=0.1)

    def __call__(self, inputs, enc: EncoderOutput, src_mask=None):
        """Teacher-forced logits ``[B, T, V]`` for input ids ``[B, T]``."""
        g = T.embedding_lookup(self.embedding, inputs)
        x = g
        for lstm, qn, attn, cn in zip(self.lstms, self.q_norms, self.attns, self.c_norms):
            q = qn(lstm(x), x)
            x = cn(attn(q, enc.k, enc.v, g, src_mask), q)
        return self.out(x)

    def init_state(self, batch):
        zeros = [Tensor(np.zeros((batch, self.cfg.d_model))) for _ in self.lstms]
        return DecoderState(list(zeros), list(zeros))

    def step(self, state: DecoderState, prev_ids, enc: EncoderOutput, src_mask=None):
        if state.step >= self.cfg.max_target_len:
            raise StepOverflow(f"decoder step {state.step} reached T_max={self.cfg.max_target_len}")
        g = T.embedding_lookup(self.embedding, np.asarray(prev_ids))
        B, d = g.shape
        x = g
        hs, cs, qs = [], [], []
        for i, (lstm, qn, attn, cn) in enumerate(zip(self.lstms, self.q_norms, self.attns, self.c_norms)):
            h, c = lstm.step(x, state.h[i], state.c[i])
            q = qn(h, x)
            ctx = attn(q.reshape(B, 1, d), enc.k, enc.v, g.reshape(B, 1, d), src_mask)
            x = cn(ctx.reshape(B, d), q)
            hs.append(h)
            cs.append(c)
            qs.append(q)
        return self.out(x), DecoderState(hs, cs, qs, g, state.step + 1)

    def trace(self):
        return AttentionTrace([a.last_weights for a in self.attns])


def pad_batch(seqs, pad=0):
    width = max(len(s) for s in seqs)
    ids = np.full((len(seqs), width), pad, dtype=np.int64)
    mask = np.zeros((len(seqs), width), dtype=bool)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = True
    return ids, mask


class Seq2Seq(Module):
    """Source embeddings, one of the four encoders, and the attention decoder."""

    def __init__(self, cfg: ModelConfig, vocab_size, word_init=None):
        rng = np.random.default_rng(cfg.seed)
        self.cfg = cfg
        self.embeddings = EmbeddingSet(vocab_size, cfg.d_model, rng,
                                       positional=cfg.encoder_kind in POSITIONAL_KINDS,
                                       word_init=word_init)
        self.encoder = build_encoder(cfg.encoder_kind, cfg.d_model, cfg.n_layers, cfg.kernel, cfg.heads, rng)
        self.decoder = LSTMDecoder(cfg, vocab_size, rng)

    def source_batch(self, sources, vocab):
        ids, mask = pad_batch([vocab.encode(s) for s in sources], vocab.pad_id)
        segs, _ = pad_batch([ner_segment_ids(s) for s in sources])
        return ids, segs, mask

    def encode(self, ids, segs, mask):
        x = self.embeddings.embed(ids, segs, self.cfg.encoder_kind)
        return self.encoder(x, mask)

    def loss(self, sources, targets, vocab):
        """Mean token cross-entropy under teacher forcing; padding is ignored."""
        ids, segs, mask = self.source_batch(sources, vocab)
        enc = self.encode(ids, segs, mask)
        encoded = [vocab.encode(t) for t in targets]
        inp, _ = pad_batch([[vocab.bos_id] + t for t in encoded], vocab.pad_id)
        out, _ = pad_batch([t + [vocab.eos_id] for t in encoded], vocab.pad_id)
        logits = self.decoder(inp, enc, mask)
        return T.cross_entropy(logits, out, ignore_index=vocab.pad_id)

    def greedy_decode(self, sources, vocab, max_len=None):
        """Argmax decoding from BOS; returns ``(token lists, truncated flags)``.

        Ties go to the lowest token id.
        """
        max_len = self.cfg.max_target_len if max_len is None else min(max_len, self.cfg.max_target_len)
        with T.no_grad():
            ids, segs, mask = self.source_batch(sources, vocab)
            enc = self.encode(ids, segs, mask)
            B = len(sources)
            state = self.decoder.init_state(B)
            prev = np.full(B, vocab.bos_id)
            done = np.zeros(B, dtype=bool)
            outputs = [[] for _ in range(B)]
            for _ in range(max_len):
                logits, state = self.decoder.step(state, prev, enc, mask)
                prev = logits.data.argmax(axis=-1)
                for b in np.flatnonzero(~done):
                    if prev[b] == vocab.eos_id:
                        done[b] = True
                    else:
                        outputs[b].append(int(prev[b]))
                if done.all():
                    break
        return [vocab.decode(o) for o in outputs], [not d for d in done]

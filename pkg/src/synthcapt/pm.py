"""Pronunciation model p(r'|r): attention encoder-decoder over phonemes, and the score pi."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .nn_utils import TrainingError, batches, check_finite, inventory_hash, n_params, seeded
from .phonemes import INS, INVENTORY, MATCH, SUB, PhonemeInventory, PhonemeSeq, align
from .recognizer import RecognitionResult, RecognizerModel, _as_pairs, hypotheses, recognize

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class PMConfig:
    emb: int = 24
    hidden: int = 48
    epochs: int = 20
    lr: float = 1e-2
    batch_size: int = 32
    seed: int = 0


@dataclass(frozen=True)
class PMScore:
    pi: float
    per_word_pi: tuple[float, ...]
    log_pi: float

    def __post_init__(self):
        if not (0.0 < self.pi <= 1.0 + 1e-12) or not np.isfinite(self.log_pi):
            raise ValueError(f"pi={self.pi} outside (0, 1]")


class PMNet(nn.Module):
    """BiGRU encoder over canonical phonemes, GRU decoder with dot-product attention plus a diagonal prior."""

    def __init__(self, n_sym: int, cfg: PMConfig):
        super().__init__()
        self.n_sym = n_sym
        self.eos = n_sym          # output vocabulary: symbols + end
        self.bos = n_sym + 1      # decoder start token
        self.pad = n_sym + 2
        self.enc_emb = nn.Embedding(n_sym + 3, cfg.emb, padding_idx=n_sym + 2)
        self.dec_emb = nn.Embedding(n_sym + 3, cfg.emb, padding_idx=n_sym + 2)
        self.encoder = nn.GRU(cfg.emb, cfg.hidden // 2, batch_first=True, bidirectional=True)
        self.decoder = nn.GRU(cfg.emb + cfg.hidden, cfg.hidden, batch_first=True)
        self.query = nn.Linear(cfg.hidden, cfg.hidden, bias=False)
        self.out = nn.Linear(2 * cfg.hidden, n_sym + 1)
        # learnable strength of a diagonal location prior (outputs mostly copy inputs in order)
        self.diag = nn.Parameter(torch.tensor(1.0))
        nn.init.normal_(self.out.weight, std=0.01)
        nn.init.zeros_(self.out.bias)

    def forward(self, src: torch.Tensor, src_len: torch.Tensor, dec_in: torch.Tensor) -> torch.Tensor:
        """Teacher-forced log-probabilities ``B x L_out x (n_sym + 1)``."""
        packed = nn.utils.rnn.pack_padded_sequence(self.enc_emb(src), src_len.cpu(), batch_first=True,
                                                   enforce_sorted=False)
        enc, _ = self.encoder(packed)  # padding never reaches the backward direction
        enc, _ = nn.utils.rnn.pad_packed_sequence(enc, batch_first=True, total_length=src.shape[1])  # B x S x H
        mask = torch.arange(src.shape[1])[None, :] < src_len[:, None]  # B x S
        B, L = dec_in.shape
        h = enc.new_zeros(1, B, enc.shape[-1])
        ctx = enc.new_zeros(B, enc.shape[-1])
        emb = self.dec_emb(dec_in)
        outs = []
        pos = torch.arange(src.shape[1], dtype=enc.dtype)
        for t in range(L):
            o, h = self.decoder(torch.cat([emb[:, t], ctx], -1)[:, None], h)
            q = self.query(o[:, 0])
            att = torch.einsum("bh,bsh->bs", q, enc) - self.diag * (pos - t).abs()[None, :]
            att = att.masked_fill(~mask, -1e9)
            ctx = torch.einsum("bs,bsh->bh", torch.softmax(att, -1), enc)
            outs.append(self.out(torch.cat([o[:, 0], ctx], -1)))
        return F.log_softmax(torch.stack(outs, 1), -1)


@dataclass(eq=False)
class PMModel:
    net: PMNet
    config: PMConfig
    inventory: PhonemeInventory = INVENTORY
    loss_trace: list[float] = field(default_factory=list)
    _infer_net: PMNet | None = field(default=None, init=False, repr=False)

    @classmethod
    def create(cls, config: PMConfig = PMConfig(), inventory: PhonemeInventory = INVENTORY) -> "PMModel":
        with seeded(config.seed):
            net = PMNet(len(inventory), config)
        net.eval()
        return cls(net, config, inventory)

    @property
    def n_params(self) -> int:
        return n_params(self.net)

    def _tensors(self, pairs: Sequence[tuple[Sequence[str], Sequence[str]]]):
        inv, net = self.inventory, self.net
        srcs = [inv.ids(r) for r, _ in pairs]
        tgts = [inv.ids(o) + [net.eos] for _, o in pairs]
        S = max(len(s) for s in srcs)
        L = max(len(t) for t in tgts)
        src = torch.full((len(pairs), S), net.pad, dtype=torch.long)
        dec_in = torch.full((len(pairs), L), net.pad, dtype=torch.long)
        tgt = torch.full((len(pairs), L), -100, dtype=torch.long)
        for b, (s, t) in enumerate(zip(srcs, tgts)):
            src[b, : len(s)] = torch.tensor(s)
            tgt[b, : len(t)] = torch.tensor(t)
            dec_in[b, : len(t)] = torch.tensor([net.bos] + t[:-1])
        src_len = torch.tensor([len(s) for s in srcs])
        return src, src_len, dec_in, tgt

    def _inference_net(self) -> PMNet:
        """Float64 copy of the trained network, so scores do not depend on batch composition."""
        if self._infer_net is None:
            self._infer_net = copy.deepcopy(self.net).double().eval()
        return self._infer_net

    def token_log_probs(self, r: Sequence[str], outputs: Sequence[Sequence[str]]) -> list[np.ndarray]:
        """Per-token log p for each output sequence (last entry is the end token)."""
        if not outputs:
            return []
        pairs = [(tuple(r), tuple(o)) for o in outputs]
        src, src_len, dec_in, tgt = self._tensors(pairs)
        with torch.no_grad():
            lp = self._inference_net()(src, src_len, dec_in)
        res = []
        for b, (_, o) in enumerate(pairs):
            n = len(o) + 1
            res.append(lp[b, torch.arange(n), tgt[b, :n]].numpy())
        return res

    def sequence_prob(self, r: Sequence[str], r_o: Sequence[str]) -> float:
        """p(r' = r_o | r)."""
        return float(np.exp(self.token_log_probs(r, [r_o])[0].sum()))

    def next_distribution(self, r: Sequence[str], prefix: Sequence[str]) -> np.ndarray:
        src, src_len, dec_in, _ = self._tensors([(tuple(r), tuple(prefix))])
        with torch.no_grad():
            lp = self._inference_net()(src, src_len, dec_in)
        return np.exp(lp[0, len(prefix)].numpy())

    def save(self, path_stem) -> None:
        stem = Path(path_stem)
        torch.save(self.net.state_dict(), stem.with_suffix(".pt"))
        meta = {"format": "synthcapt-pm", "version": CHECKPOINT_VERSION,
                "inventory_hash": inventory_hash(self.inventory.symbols), "config": asdict(self.config),
                "seed": self.config.seed, "loss_trace": self.loss_trace}
        stem.with_suffix(".json").write_text(json.dumps(meta, indent=1, sort_keys=True))

    @classmethod
    def load(cls, path_stem, inventory: PhonemeInventory = INVENTORY) -> "PMModel":
        stem = Path(path_stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        if meta.get("format") != "synthcapt-pm" or meta["inventory_hash"] != inventory_hash(inventory.symbols):
            raise ValueError(f"{stem}: incompatible checkpoint")
        model = cls.create(PMConfig(**meta["config"]), inventory)
        model.net.load_state_dict(torch.load(stem.with_suffix(".pt")))
        model._infer_net = None
        model.loss_trace = list(meta["loss_trace"])
        return model


# --- corpus and training ---------------------------------------------------------

def build_pm_corpus(recognizer: RecognizerModel, native_corpus) -> list[tuple[PhonemeSeq, tuple[str, ...]]]:
    """(canonical r, recognised r_o) for every native utterance."""
    pairs = _as_pairs(native_corpus)
    if not pairs:
        raise ValueError("empty native corpus")
    return [(r, tuple(recognize(recognizer, u).decoded.phonemes)) for u, r in pairs]


def train_pm(pairs, hyper: PMConfig = PMConfig(), inventory: PhonemeInventory = INVENTORY) -> PMModel:
    """Teacher-forced cross-entropy training of p(r'|r)."""
    pairs = [(tuple(r.phonemes if isinstance(r, PhonemeSeq) else r), tuple(o)) for r, o in pairs]
    if not pairs:
        raise TrainingError("empty pronunciation-model corpus")
    model = PMModel.create(hyper, inventory)
    if hyper.epochs == 0:
        return model
    rng = np.random.default_rng(hyper.seed)
    opt = torch.optim.Adam(model.net.parameters(), lr=hyper.lr)
    trace: list[float] = []
    model.net.train()
    with seeded(hyper.seed):
        for _ in range(hyper.epochs):
            total, count = 0.0, 0
            for idx in batches(len(pairs), hyper.batch_size, rng):
                src, src_len, dec_in, tgt = model._tensors([pairs[i] for i in idx])
                lp = model.net(src, src_len, dec_in)
                n_tok = int((tgt != -100).sum())
                loss = F.nll_loss(lp.reshape(-1, lp.shape[-1]), tgt.reshape(-1), ignore_index=-100,
                                  reduction="sum") / n_tok
                value = check_finite(loss, trace, "pronunciation model training")
                opt.zero_grad()
                loss.backward()
                nn.utils.clip_grad_norm_(model.net.parameters(), 5.0)
                opt.step()
                total += value * n_tok
                count += n_tok
            trace.append(total / count)
    model.net.eval()
    model._infer_net = None
    model.loss_trace = trace
    return model


# --- scoring ---------------------------------------------------------------------

def token_words(r: PhonemeSeq, r_o: Sequence[str]) -> list[int]:
    """Word of ``r`` each recognised token is attributed to (the end token goes to the last word).

    Matched/substituted tokens take the word of their aligned canonical
    position; inserted tokens take the word of the preceding canonical position.
    """
    words = []
    if r_o:
        last = 0
        for op in align(r.phonemes, r_o, inventory=None).ops:
            if op.op in (MATCH, SUB):
                words.append(r.word_of(op.i))
            elif op.op == INS:
                words.append(r.word_of(last))
            if op.i is not None:
                last = op.i
    return words + [r.n_words - 1]


def score(pm: PMModel, recognizer_out: RecognitionResult, r: PhonemeSeq, k: int | None = 8,
          exact: bool = False) -> PMScore:
    """pi = sum over hypotheses r_o of p(r_o|o) * p(r' = r_o | r).

    Hypotheses come from the posteriorgram (top-``k`` expansion, or all of
    them in ``exact`` mode).  ``per_word_pi[w]`` is the hypothesis-weighted
    product of the PM token probabilities attributed to word ``w``, with
    weights p(r_o|o) renormalised over the hypothesis set.
    """
    if k is not None and k < 1:
        raise ValueError("k must be >= 1")
    inv = pm.inventory
    hyps = hypotheses(recognizer_out.posteriorgram, k=k, exact=exact)
    outputs = [tuple(inv.symbols[i] for i in lab) for lab, _ in hyps]
    weights = np.array([w for _, w in hyps])
    tok_lp = pm.token_log_probs(r.phonemes, outputs)
    seq_p = np.array([np.exp(t.sum()) for t in tok_lp])
    terms = weights * seq_p
    pi = float(terms.sum())
    per_word = np.zeros(r.n_words)
    norm = weights / weights.sum()
    for wgt, o, lp in zip(norm, outputs, tok_lp):
        word_lp = np.zeros(r.n_words)
        np.add.at(word_lp, token_words(r, o), lp)
        per_word += wgt * np.exp(word_lp)
    with np.errstate(divide="ignore"):
        log_pi = float(np.logaddexp.reduce(np.log(weights) + np.array([t.sum() for t in tok_lp])))
    pi = min(max(pi, np.finfo(float).tiny), 1.0)  # keep (0, 1] under underflow/rounding
    return PMScore(pi=pi, per_word_pi=tuple(float(x) for x in np.clip(per_word, 0.0, 1.0)), log_pi=log_pi)


__all__ = ["PMConfig", "PMModel", "PMScore", "build_pm_corpus", "train_pm", "score", "token_words"]

"""Weakly supervised word-level mispronunciation detector with a phoneme-recognition auxiliary task.

Architecture (MDN = mispronunciation detection network, PRN = phoneme
recognition network):

* a convolutional frame encoder shared by both tasks;
* PRN: CTC head over the shared frame encodings;
* MDN: canonical phoneme embeddings with a small context convolution attend
  over the frame encodings (content attention plus a location prior centred
  on the phoneme's expected relative position); an MLP compares each
  phoneme with its attended acoustics and emits a phoneme error logit; a
  word's error probability is the noisy-OR of its phonemes.

Training minimises word-level BCE + lambda * CTC (CTC only on transcribed L1
speech), then optionally fine-tunes on the L2 corpus.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .detectors import WordErrorProbs
from .injector import TrainingExample
from .nn_utils import (TrainingError, batches, check_finite, finite_difference_check, inventory_hash,
                       load_checkpoint, n_params, normalize_frames, save_checkpoint, seeded)
from .phonemes import INVENTORY, PhonemeInventory, PhonemeSeq
from .recognizer import CTCHead, FrameEncoder
from .speech import Utterance


@dataclass(frozen=True)
class WeaklySConfig:
    hidden: int = 48
    kernel: int = 5
    layers: int = 3
    emb: int = 32
    phone_context: int = 1           # width of the canonical-phoneme context convolution
    ctc_weight: float = 0.5          # lambda
    epochs: int = 12
    adapt_epochs: int = 6
    lr: float = 3e-3
    adapt_lr: float = 1e-3
    batch_size: int = 32
    use_l1l2: bool = True            # False: NO-L1L2-TRAIN
    l2_adapt: bool = True            # False: NO-L2-ADAPT
    seed: int = 0


class MDNNet(nn.Module):
    def __init__(self, cfg: WeaklySConfig, n_sym: int, n_classes: int):
        super().__init__()
        h = cfg.hidden
        self.pad = n_sym
        self.encoder = FrameEncoder(h, cfg.kernel, cfg.layers)
        self.ctc_head = CTCHead(h, n_classes)
        self.phon_emb = nn.Embedding(n_sym + 1, cfg.emb, padding_idx=n_sym)
        self.phon_ctx = nn.Conv1d(cfg.emb, h, cfg.phone_context, padding=cfg.phone_context // 2)
        self.key = nn.Linear(h, h)
        self.value = nn.Linear(h, h)
        self.loc = nn.Parameter(torch.tensor(0.5))
        self.mlp = nn.Sequential(nn.Linear(3 * h, h), nn.ReLU(), nn.Linear(h, 1))

    def forward(self, x, frame_len, phon, phon_len):
        """Phoneme error logits ``B x N``, attention ``B x N x T`` and CTC log-probs ``B x T x C``."""
        enc = self.encoder(x, frame_len)                             # B x H x T
        frames = enc.transpose(1, 2)                                 # B x T x H
        q = torch.relu(self.phon_ctx(self.phon_emb(phon).transpose(1, 2))).transpose(1, 2)  # B x N x H
        k, v = self.key(frames), self.value(frames)
        content = torch.einsum("bnh,bth->bnt", q, k) / math.sqrt(q.shape[-1])
        T, N = x.shape[-1], phon.shape[1]
        dt = frames.dtype
        rel_t = (torch.arange(T, dtype=dt)[None, :] + 0.5) / frame_len[:, None].to(dt)  # B x T
        rel_p = (torch.arange(N, dtype=dt)[None, :] + 0.5) / phon_len[:, None].to(dt)   # B x N
        offset = (rel_t[:, None, :] - rel_p[:, :, None]) * phon_len[:, None, None].to(dt)  # in phonemes
        scores = content - F.softplus(self.loc) * offset ** 2
        fmask = torch.arange(T)[None, :] < frame_len[:, None]
        scores = scores.masked_fill(~fmask[:, None, :], -1e9)
        att = torch.softmax(scores, -1)
        a = torch.einsum("bnt,bth->bnh", att, v)
        logits = self.mlp(torch.cat([q, a, q * a], -1)).squeeze(-1)  # B x N
        return logits, att, self.ctc_head(enc)


def word_log_no_error(logits: torch.Tensor, word_idx: torch.Tensor, n_words: int) -> torch.Tensor:
    """log P(word correct) = -sum softplus(phoneme logits) per word (noisy-OR); ``B x W``."""
    neg = -F.softplus(logits)                                        # log(1 - p_phoneme)
    onehot = (word_idx[:, :, None] == torch.arange(n_words)[None, None, :]).to(logits.dtype)
    return torch.einsum("bn,bnw->bw", neg, onehot)


def word_bce(log_ok: torch.Tensor, labels: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy with P(error) = 1 - exp(log_ok)."""
    log_ok = log_ok.clamp(max=-1e-6)
    log_err = torch.log(-torch.expm1(log_ok))
    nll = -(labels * log_err + (1 - labels) * log_ok)
    return (nll * mask).sum() / mask.sum()


@dataclass(eq=False)
class MDNModel:
    net: MDNNet
    config: WeaklySConfig
    inventory: PhonemeInventory = INVENTORY
    loss_trace: list[float] = field(default_factory=list)

    @classmethod
    def create(cls, config: WeaklySConfig = WeaklySConfig(), inventory: PhonemeInventory = INVENTORY) -> "MDNModel":
        with seeded(config.seed):
            net = MDNNet(config, len(inventory), inventory.n_classes)
        net.eval()
        return cls(net, config, inventory)

    @property
    def n_params(self) -> int:
        return n_params(self.net)

    def metadata(self) -> dict:
        return {"format": "synthcapt-weakly-s", "version": 1, "config": asdict(self.config),
                "inventory_hash": inventory_hash(self.inventory.symbols), "loss_trace": self.loss_trace}

    def save(self, path_stem) -> None:
        save_checkpoint(path_stem, self.net, self.metadata())

    @classmethod
    def load(cls, path_stem, inventory: PhonemeInventory = INVENTORY) -> "MDNModel":
        meta, state = load_checkpoint(path_stem, "synthcapt-weakly-s", 1, inventory.symbols)
        model = cls.create(WeaklySConfig(**meta["config"]), inventory)
        model.net.load_state_dict(state)
        model.loss_trace = list(meta["loss_trace"])
        return model


# --- batching --------------------------------------------------------------------

@dataclass
class _Item:
    frames: np.ndarray
    phon: list[int]
    word_idx: list[int]
    labels: tuple[int, ...]
    transcript: list[int] | None


def _item(ex: TrainingExample, inventory: PhonemeInventory, transcribed: bool) -> _Item:
    r = ex.canonical
    tr = inventory.ids(ex.speech.canonical.phonemes) if transcribed else None
    return _Item(normalize_frames(ex.speech.speech), inventory.ids(r.phonemes), r.word_index(),
                 ex.labels.word_errors, tr)


def _collate(items: Sequence[_Item], pad: int, dtype=torch.float32):
    B = len(items)
    T = max(it.frames.shape[0] for it in items)
    N = max(len(it.phon) for it in items)
    W = max(len(it.labels) for it in items)
    x = torch.zeros(B, items[0].frames.shape[1], T, dtype=dtype)
    phon = torch.full((B, N), pad, dtype=torch.long)
    widx = torch.full((B, N), -1, dtype=torch.long)
    labels = torch.zeros(B, W, dtype=dtype)
    wmask = torch.zeros(B, W, dtype=dtype)
    for b, it in enumerate(items):
        x[b, :, : it.frames.shape[0]] = torch.as_tensor(it.frames.T, dtype=dtype)
        phon[b, : len(it.phon)] = torch.tensor(it.phon)
        widx[b, : len(it.word_idx)] = torch.tensor(it.word_idx)
        labels[b, : len(it.labels)] = torch.tensor(it.labels, dtype=dtype)
        wmask[b, : len(it.labels)] = 1
    frame_len = torch.tensor([it.frames.shape[0] for it in items])
    phon_len = torch.tensor([len(it.phon) for it in items])
    return x, frame_len, phon, phon_len, widx, labels, wmask


def _loss(net: MDNNet, items: Sequence[_Item], ctc_weight: float, blank: int, dtype=torch.float32):
    x, frame_len, phon, phon_len, widx, labels, wmask = _collate(items, net.pad, dtype)
    logits, _, log_probs = net(x, frame_len, phon, phon_len)
    loss = word_bce(word_log_no_error(logits, widx, labels.shape[1]), labels, wmask)
    ctc_idx = [b for b, it in enumerate(items) if it.transcript]
    if ctc_weight > 0 and ctc_idx:
        targets = torch.tensor([k for b in ctc_idx for k in items[b].transcript], dtype=torch.long)
        tl = torch.tensor([len(items[b].transcript) for b in ctc_idx])
        ctc = F.ctc_loss(log_probs[ctc_idx].transpose(0, 1), targets, frame_len[ctc_idx], tl, blank=blank,
                         reduction="mean")
        loss = loss + ctc_weight * ctc
    return loss


# --- training --------------------------------------------------------------------

@dataclass
class WeaklySData:
    """Training material: transcribed L1 speech, labelled L2 speech, synthetic examples."""

    l1: list[TrainingExample]
    l2: list[TrainingExample]
    synthetic: list[TrainingExample] = field(default_factory=list)


def _run_phase(model: MDNModel, items: list[_Item], epochs: int, lr: float, rng, trace: list[float], what: str):
    if epochs == 0 or not items:
        return
    cfg = model.config
    opt = torch.optim.Adam(model.net.parameters(), lr=lr)
    model.net.train()
    for _ in range(epochs):
        total = 0.0
        for idx in batches(len(items), cfg.batch_size, rng):
            loss = _loss(model.net, [items[i] for i in idx], cfg.ctc_weight, model.inventory.blank_id)
            value = check_finite(loss, trace, what)
            opt.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(model.net.parameters(), 5.0)
            opt.step()
            total += value * len(idx)
        trace.append(total / len(items))
    model.net.eval()


def train_weakly_s(data: WeaklySData, hyper: WeaklySConfig = WeaklySConfig(),
                   inventory: PhonemeInventory = INVENTORY) -> MDNModel:
    """Phase 1 on L1 + L2 + synthetic (ablation switches drop parts), phase 2 on L2 only."""
    phase1 = [_item(ex, inventory, True) for ex in data.l1] if hyper.use_l1l2 else []
    if hyper.use_l1l2:
        phase1 += [_item(ex, inventory, False) for ex in data.l2]
    phase1 += [_item(ex, inventory, False) for ex in data.synthetic]
    phase2 = [_item(ex, inventory, False) for ex in data.l2] if hyper.l2_adapt else []
    labels = {y for it in phase1 + phase2 for y in it.labels}
    if labels != {0, 1}:
        raise TrainingError("training data must contain both correct and mispronounced words")
    model = MDNModel.create(hyper, inventory)
    rng = np.random.default_rng(hyper.seed)
    trace: list[float] = []
    with seeded(hyper.seed):
        _run_phase(model, phase1, hyper.epochs, hyper.lr, rng, trace, "WEAKLY-S training")
        _run_phase(model, phase2, hyper.adapt_epochs, hyper.adapt_lr, rng, trace, "WEAKLY-S L2 adaptation")
    model.loss_trace = trace
    return model


# --- inference -------------------------------------------------------------------

def predict_weakly_s(model: MDNModel, examples: Sequence[TrainingExample], batch_size: int = 64) -> list[np.ndarray]:
    """Per-word error probabilities for many examples at once."""
    out = []
    for k in range(0, len(examples), batch_size):
        chunk = examples[k:k + batch_size]
        items = [_item(ex, model.inventory, False) for ex in chunk]
        out.extend(_predict_items(model, items))
    return out


def _predict_items(model: MDNModel, items: Sequence[_Item]) -> list[np.ndarray]:
    x, frame_len, phon, phon_len, widx, labels, _ = _collate(items, model.net.pad)
    with torch.no_grad():
        logits, _, _ = model.net(x, frame_len, phon, phon_len)
        log_ok = word_log_no_error(logits.double(), widx, labels.shape[1])
    probs = (-torch.expm1(log_ok)).numpy()
    return [probs[b, : len(it.labels)].clip(0.0, 1.0) for b, it in enumerate(items)]


def detect_weakly_s(model: MDNModel, u: Utterance, r: PhonemeSeq, threshold: float = 0.5) -> WordErrorProbs:
    if r.n_words == 0:
        raise ValueError("canonical sequence has no words")
    item = _Item(normalize_frames(u.speech), model.inventory.ids(r.phonemes), r.word_index(),
                 (0,) * r.n_words, None)
    return WordErrorProbs(tuple(_predict_items(model, [item])[0]), threshold=threshold)


def attention_gradient_check(model: MDNModel, examples: Sequence[TrainingExample], n_coords: int | None = None,
                             seed: int = 0) -> float:
    """Max relative error of the joint-loss gradients vs central differences (float64)."""
    net = copy.deepcopy(model.net).double()
    items = [_item(ex, model.inventory, True) for ex in examples]

    def loss_fn():
        return _loss(net, items, model.config.ctc_weight, model.inventory.blank_id, torch.float64)

    return finite_difference_check(list(net.parameters()), loss_fn, n_coords=n_coords, seed=seed)


__all__ = ["WeaklySConfig", "WeaklySData", "MDNModel", "train_weakly_s", "detect_weakly_s", "predict_weakly_s",
           "attention_gradient_check"]

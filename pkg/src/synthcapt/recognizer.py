"""CTC phoneme recognizer: training, greedy decoding, posteriorgram hypotheses."""

from __future__ import annotations

import copy
import heapq
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .nn_utils import (TrainingError, batches, check_finite, finite_difference_check, inventory_hash,
                       n_params, normalize_frames, pad_frames, seeded)
from .phonemes import INVENTORY, PhonemeInventory, PhonemeSeq
from .speech import N_FEATS, Utterance

CHECKPOINT_VERSION = 1


# --- data types ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PhonemePosteriorgram:
    """``T x (|inventory| + 1)`` row-stochastic matrix; the last column is blank."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] < 1:
            raise ValueError("posteriorgram must be a non-empty T x C matrix")
        if np.any(p < 0) or np.any(p > 1) or not np.allclose(p.sum(1), 1.0, atol=1e-6):
            raise ValueError("posteriorgram rows must be probability distributions")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n_frames(self) -> int:
        return self.probs.shape[0]

    @property
    def blank_id(self) -> int:
        return self.probs.shape[1] - 1


@dataclass(frozen=True, eq=False)
class RecognitionResult:
    decoded: PhonemeSeq
    per_phoneme_likelihood: np.ndarray
    posteriorgram: PhonemePosteriorgram
    emitting_frames: tuple[tuple[int, int], ...] = ()  # (start, end) of each token's argmax run


@dataclass(frozen=True)
class RecognizerConfig:
    hidden: int = 48
    kernel: int = 5
    layers: int = 3
    epochs: int = 30
    lr: float = 3e-3
    batch_size: int = 16
    seed: int = 0


# --- model -----------------------------------------------------------------------

class FrameEncoder(nn.Module):
    """Stack of same-padded 1-D convolutions over normalised frames."""

    def __init__(self, hidden: int, kernel: int, layers: int, n_in: int = N_FEATS):
        super().__init__()
        convs, c = [], n_in
        for _ in range(layers):
            convs.append(nn.Conv1d(c, hidden, kernel, padding=kernel // 2))
            c = hidden
        self.convs = nn.ModuleList(convs)
        self.out_dim = hidden

    def forward(self, x: torch.Tensor, lengths: torch.Tensor | None = None) -> torch.Tensor:  # B x F x T -> B x H x T
        """With ``lengths``, padded frames are zeroed between layers so they never leak into real ones."""
        mask = None if lengths is None else (torch.arange(x.shape[-1])[None, :] < lengths[:, None])[:, None, :]
        for conv in self.convs:
            x = torch.relu(conv(x if mask is None else x * mask))
        return x if mask is None else x * mask


class CTCHead(nn.Module):
    def __init__(self, hidden: int, n_classes: int):
        super().__init__()
        self.proj = nn.Linear(hidden, n_classes)
        nn.init.normal_(self.proj.weight, std=0.01)  # untrained model stays near-uniform
        nn.init.zeros_(self.proj.bias)

    def forward(self, h: torch.Tensor) -> torch.Tensor:  # B x H x T -> B x T x C log-probs
        return F.log_softmax(self.proj(h.transpose(1, 2)), dim=-1)


class RecognizerNet(nn.Module):
    def __init__(self, cfg: RecognizerConfig, n_classes: int):
        super().__init__()
        self.encoder = FrameEncoder(cfg.hidden, cfg.kernel, cfg.layers)
        self.head = CTCHead(cfg.hidden, n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.encoder(x))


@dataclass(eq=False)
class RecognizerModel:
    net: RecognizerNet
    config: RecognizerConfig
    inventory: PhonemeInventory = INVENTORY
    loss_trace: list[float] = field(default_factory=list)
    epochs_trained: int = 0

    @classmethod
    def create(cls, config: RecognizerConfig = RecognizerConfig(),
               inventory: PhonemeInventory = INVENTORY) -> "RecognizerModel":
        with seeded(config.seed):
            net = RecognizerNet(config, inventory.n_classes)
        return cls(net, config, inventory)

    @property
    def n_classes(self) -> int:
        return self.inventory.n_classes

    @property
    def n_params(self) -> int:
        return n_params(self.net)

    def metadata(self) -> dict:
        return {"format": "synthcapt-recognizer", "version": CHECKPOINT_VERSION,
                "inventory_hash": inventory_hash(self.inventory.symbols),
                "config": asdict(self.config), "seed": self.config.seed,
                "epochs_trained": self.epochs_trained, "loss_trace": self.loss_trace}

    def save(self, path_stem) -> None:
        """Write ``<stem>.pt`` (state dict) and ``<stem>.json`` (metadata)."""
        stem = Path(path_stem)
        torch.save(self.net.state_dict(), stem.with_suffix(".pt"))
        stem.with_suffix(".json").write_text(json.dumps(self.metadata(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path_stem, inventory: PhonemeInventory = INVENTORY) -> "RecognizerModel":
        stem = Path(path_stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        if meta.get("format") != "synthcapt-recognizer" or meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{stem}: unsupported checkpoint")
        if meta["inventory_hash"] != inventory_hash(inventory.symbols):
            raise ValueError(f"{stem}: checkpoint was trained on a different inventory")
        model = cls.create(RecognizerConfig(**meta["config"]), inventory)
        model.net.load_state_dict(torch.load(stem.with_suffix(".pt")))
        model.loss_trace = list(meta["loss_trace"])
        model.epochs_trained = meta["epochs_trained"]
        return model


# --- training --------------------------------------------------------------------

def _as_pairs(corpus) -> list[tuple[Utterance, PhonemeSeq]]:
    pairs = []
    for item in corpus:
        if isinstance(item, Utterance):
            pairs.append((item, item.canonical))
        elif hasattr(item, "speech") and hasattr(item, "canonical"):  # TrainingExample
            pairs.append((item.speech, item.canonical))
        else:
            u, r = item
            pairs.append((u, r))
    return pairs


def ctc_batch_loss(log_probs: torch.Tensor, lengths: torch.Tensor, targets: Sequence[Sequence[int]],
                   blank: int, reduction: str = "mean") -> torch.Tensor:
    """Summed CTC negative log-likelihood (divided by batch size for ``mean``)."""
    if any(len(t) == 0 for t in targets):
        raise ValueError("CTC targets must be non-empty")
    flat = torch.tensor([i for t in targets for i in t], dtype=torch.long)
    tl = torch.tensor([len(t) for t in targets], dtype=torch.long)
    loss = F.ctc_loss(log_probs.transpose(0, 1), flat, lengths, tl, blank=blank, reduction="sum",
                      zero_infinity=False)
    return loss / len(targets) if reduction == "mean" else loss


def encode_batch(items: Sequence[tuple[Utterance, PhonemeSeq]], inventory: PhonemeInventory,
                 dtype=torch.float32):
    x, lengths = pad_frames([normalize_frames(u.speech) for u, _ in items], dtype)
    targets = [inventory.ids(r.phonemes) for _, r in items]
    return x, lengths, targets


def train_recognizer(corpus, hyper: RecognizerConfig = RecognizerConfig(),
                     inventory: PhonemeInventory = INVENTORY) -> RecognizerModel:
    """Minimise CTC loss over (utterance, transcription) pairs.

    ``corpus`` holds utterances (transcribed by their canonical sequence),
    training examples or explicit ``(utterance, PhonemeSeq)`` pairs.
    """
    pairs = _as_pairs(corpus)
    if not pairs:
        raise TrainingError("empty training corpus")
    model = RecognizerModel.create(hyper, inventory)
    if hyper.epochs == 0:
        return model
    rng = np.random.default_rng(hyper.seed)
    opt = torch.optim.Adam(model.net.parameters(), lr=hyper.lr)
    encoded = [encode_batch([p], inventory) for p in pairs]  # cache normalised frames
    trace: list[float] = []
    model.net.train()
    with seeded(hyper.seed):
        for _ in range(hyper.epochs):
            epoch_loss, count = 0.0, 0
            for idx in batches(len(pairs), hyper.batch_size, rng):
                x, lengths, targets = _collate([encoded[i] for i in idx])
                log_probs = model.net(x)
                loss = ctc_batch_loss(log_probs, lengths, targets, inventory.blank_id)
                value = check_finite(loss, trace, "recognizer training")
                opt.zero_grad()
                loss.backward()
                nn.utils.clip_grad_norm_(model.net.parameters(), 5.0)
                opt.step()
                epoch_loss += value * len(idx)
                count += len(idx)
            trace.append(epoch_loss / count)
            model.epochs_trained += 1
    model.net.eval()
    model.loss_trace = trace
    return model


def _collate(items):
    xs = [x[0, :, : int(l[0])] for x, l, _ in items]
    lengths = torch.tensor([x.shape[1] for x in xs], dtype=torch.long)
    out = torch.zeros(len(xs), xs[0].shape[0], int(lengths.max()), dtype=xs[0].dtype)
    for b, x in enumerate(xs):
        out[b, :, : x.shape[1]] = x
    return out, lengths, [t[0] for _, _, t in items]


def evaluate_loss(model: RecognizerModel, corpus) -> float:
    pairs = _as_pairs(corpus)
    with torch.no_grad():
        x, lengths, targets = encode_batch(pairs, model.inventory)
        return float(ctc_batch_loss(model.net(x), lengths, targets, model.inventory.blank_id))


# --- inference -------------------------------------------------------------------

def posteriorgram(model: RecognizerModel, u: Utterance) -> PhonemePosteriorgram:
    if u.speech.shape[0] == 0:
        raise ValueError("utterance has no frames")
    x = torch.as_tensor(normalize_frames(u.speech).T[None], dtype=torch.float32)
    with torch.no_grad():
        h = model.net.encoder(x)
        logits = model.net.head.proj(h.transpose(1, 2))[0].double().numpy()
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    return PhonemePosteriorgram(p / p.sum(axis=1, keepdims=True))


def greedy_decode(post: PhonemePosteriorgram, inventory: PhonemeInventory = INVENTORY) -> RecognitionResult:
    """Best-path decode: argmax per frame, merge repeats, drop blanks."""
    probs = post.probs
    path = probs.argmax(axis=1)
    blank = post.blank_id
    tokens, runs = [], []
    t = 0
    T = len(path)
    while t < T:
        s = t
        while t < T and path[t] == path[s]:
            t += 1
        if path[s] != blank:
            tokens.append(int(path[s]))
            runs.append((s, t))
    lik = np.array([probs[s:e, k].mean() for k, (s, e) in zip(tokens, runs)], dtype=np.float64)
    syms = [inventory.symbols[k] for k in tokens]
    decoded = PhonemeSeq.single(syms) if syms else PhonemeSeq((), ())
    return RecognitionResult(decoded, lik, post, tuple(runs))


def recognize(model: RecognizerModel, u: Utterance) -> RecognitionResult:
    return greedy_decode(posteriorgram(model, u), model.inventory)


def phoneme_error_rate(model: RecognizerModel, utterances: Sequence[Utterance]) -> float:
    from .phonemes import align

    errors = total = 0
    for u in utterances:
        dec = recognize(model, u).decoded
        ref = u.canonical.phonemes
        errors += len(ref) if len(dec) == 0 else align(ref, dec.phonemes).cost
        total += len(ref)
    return errors / total


# --- CTC scoring in numpy --------------------------------------------------------

def ctc_log_prob(probs: np.ndarray, labels: Sequence[int], blank: int) -> float:
    """log p(labels | posteriorgram) by the CTC forward recursion (log space)."""
    T = probs.shape[0]
    with np.errstate(divide="ignore"):
        logp = np.log(probs)
    ext = [blank]
    for k in labels:
        ext += [int(k), blank]
    S = len(ext)
    if len(labels) > T:
        return -np.inf
    alpha = np.full(S, -np.inf)
    alpha[0] = logp[0, ext[0]]
    if S > 1:
        alpha[1] = logp[0, ext[1]]
    ext_arr = np.array(ext)
    skip_ok = np.zeros(S, dtype=bool)
    skip_ok[2:] = (ext_arr[2:] != blank) & (ext_arr[2:] != ext_arr[:-2])
    for t in range(1, T):
        prev1 = np.concatenate([[-np.inf], alpha[:-1]])
        prev2 = np.concatenate([[-np.inf, -np.inf], alpha[:-2]])[:S]
        prev2 = np.where(skip_ok, prev2, -np.inf)
        alpha = np.logaddexp(np.logaddexp(alpha, prev1), prev2) + logp[t, ext_arr]
    tail = alpha[-1] if S == 1 else np.logaddexp(alpha[-1], alpha[-2])
    return float(tail)


def collapse(path: Sequence[int], blank: int) -> tuple[int, ...]:
    out, prev = [], None
    for k in path:
        if k != prev and k != blank:
            out.append(int(k))
        prev = k
    return tuple(out)


class TooManyPaths(RuntimeError):
    pass


def hypotheses(post: PhonemePosteriorgram, k: int | None = 8, exact: bool = False,
               max_paths: int = 200_000) -> list[tuple[tuple[int, ...], float]]:
    """Distinct collapsed labelings with their CTC probability p(r_o|o).

    Default mode expands the best path with per-frame runner-up symbols in
    order of path probability (k-smallest subset sums) and keeps the first
    ``k`` distinct labelings; ``k=None`` keeps every labeling reachable that
    way.  ``exact`` enumerates every path over the non-zero support of each
    frame.  Labelings are returned sorted by decreasing probability.
    """
    if k is not None and k < 1:
        raise ValueError("k must be >= 1")
    probs, blank = post.probs, post.blank_id
    labelings = _exact_labelings(probs, blank, max_paths) if exact else _top2_labelings(probs, blank, k, max_paths)
    scored = [(lab, float(np.exp(ctc_log_prob(probs, lab, blank)))) for lab in labelings]
    scored.sort(key=lambda x: (-x[1], x[0]))
    return scored[:k] if (k is not None and exact) else scored


def _exact_labelings(probs, blank, max_paths):
    support = [np.flatnonzero(row > 0) for row in probs]
    total = 1
    for s in support:
        total *= len(s)
        if total > max_paths:
            raise TooManyPaths(f"more than {max_paths} paths in the posteriorgram support")
    # expand incrementally on (collapsed prefix, last symbol) states to stay small
    states = {((), None)}
    for s in support:
        states = {(_extend(pre, last, int(c), blank), int(c)) for pre, last in states for c in s}
    return sorted({pre for pre, _ in states})


def _extend(prefix, last, c, blank):
    if c == blank or c == last:
        return prefix
    return prefix + (c,)


def _top2_labelings(probs, blank, k, max_paths):
    order = np.argsort(-probs, axis=1, kind="stable")
    best, second = order[:, 0], order[:, 1]
    T = probs.shape[0]
    p1 = probs[np.arange(T), best]
    p2 = probs[np.arange(T), second]
    frames = [t for t in range(T) if p2[t] > 0]
    with np.errstate(divide="ignore"):
        deltas = np.log(p1[frames]) - np.log(p2[frames])
    rank = np.argsort(deltas, kind="stable")
    d = deltas[rank]
    cand = [frames[i] for i in rank]

    cand_arr = np.asarray(cand, dtype=np.int64)
    prev = np.empty(T, dtype=best.dtype)

    def labeling(subset):
        path = best.copy()
        if subset:
            idx = cand_arr[list(subset)]
            path[idx] = second[idx]
        prev[0] = -1
        prev[1:] = path[:-1]
        return tuple((path[(path != blank) & (path != prev)]).tolist())

    seen = {labeling(())}
    found = [labeling(())]
    if not cand:
        return found
    heap = [(float(d[0]), (0,))]
    popped = 1
    while heap and (k is None or len(found) < k) and popped < max_paths:
        s, subset = heapq.heappop(heap)
        popped += 1
        lab = labeling(subset)
        if lab not in seen:
            seen.add(lab)
            found.append(lab)
        last = subset[-1]
        if last + 1 < len(cand):
            heapq.heappush(heap, (s + float(d[last + 1]), subset + (last + 1,)))
            heapq.heappush(heap, (s - float(d[last]) + float(d[last + 1]), subset[:-1] + (last + 1,)))
    return found


# --- gradient check --------------------------------------------------------------

def gradient_check(model: RecognizerModel, batch, n_coords: int | None = None, seed: int = 0) -> float:
    """Max relative error of autograd CTC gradients vs central finite differences (float64)."""
    pairs = _as_pairs(batch)
    if any(len(r) == 0 for _, r in pairs):
        raise ValueError("CTC targets must be non-empty")
    net = copy.deepcopy(model.net).double()
    x, lengths, targets = encode_batch(pairs, model.inventory, torch.float64)
    params = list(net.parameters())

    def loss_fn():
        return ctc_batch_loss(net(x), lengths, targets, model.inventory.blank_id, reduction="sum")

    return finite_difference_check(params, loss_fn, n_coords=n_coords, seed=seed)


__all__ = ["PhonemePosteriorgram", "RecognitionResult", "RecognizerConfig", "RecognizerModel", "FrameEncoder",
           "CTCHead", "train_recognizer", "recognize", "posteriorgram", "greedy_decode", "ctc_log_prob",
           "hypotheses", "collapse", "gradient_check", "phoneme_error_rate", "TooManyPaths", "evaluate_loss"]

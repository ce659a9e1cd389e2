"""Small shared helpers for the torch models."""

from __future__ import annotations

import hashlib
import json
import math
from contextlib import contextmanager
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .speech import ENERGY, F0, N_BANDS, N_FEATS


class TrainingError(RuntimeError):
    """Raised when optimisation diverges or the training data is unusable."""

    def __init__(self, message: str, trace: Sequence[float] = ()):
        super().__init__(message)
        self.trace = list(trace)


def normalize_frames(speech: np.ndarray) -> np.ndarray:
    """Per-utterance normalisation: band mean removal, log-f0 and log-energy relative to the mean.

    Removes the additive speaker timbre and the speaker's f0 baseline.
    """
    x = np.empty_like(speech, dtype=np.float64)
    bands = speech[:, :N_BANDS]
    x[:, :N_BANDS] = bands - bands.mean(axis=0, keepdims=True)
    for k in (F0, ENERGY):
        logv = np.log(np.clip(speech[:, k], 1e-3, None))
        x[:, k] = (logv - logv.mean()) * 5.0
    return x


def pad_frames(arrays: Sequence[np.ndarray], dtype=torch.float32) -> tuple[torch.Tensor, torch.Tensor]:
    """Stack ``T_i x F`` arrays into ``B x F x T_max`` plus lengths."""
    lengths = torch.tensor([a.shape[0] for a in arrays], dtype=torch.long)
    out = torch.zeros(len(arrays), arrays[0].shape[1], int(lengths.max()), dtype=dtype)
    for b, a in enumerate(arrays):
        out[b, :, : a.shape[0]] = torch.as_tensor(a.T, dtype=dtype)
    return out, lengths


def length_mask(lengths: torch.Tensor, max_len: int | None = None) -> torch.Tensor:
    max_len = int(lengths.max()) if max_len is None else max_len
    return torch.arange(max_len)[None, :] < lengths[:, None]


@contextmanager
def seeded(seed: int):
    """Seed torch's global generator for the duration of model construction/training."""
    state = torch.random.get_rng_state()
    torch.manual_seed(seed)
    try:
        yield
    finally:
        torch.random.set_rng_state(state)


def check_finite(loss: torch.Tensor, trace: list[float], what: str) -> float:
    value = float(loss.detach())
    if not math.isfinite(value):
        raise TrainingError(f"{what}: non-finite loss after {len(trace)} steps", trace)
    return value


def n_params(module: torch.nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def inventory_hash(symbols: Sequence[str]) -> str:
    return hashlib.sha256(" ".join(symbols).encode()).hexdigest()[:16]


def save_checkpoint(path_stem, net: torch.nn.Module, meta: dict) -> None:
    """Write ``<stem>.pt`` (state dict) and ``<stem>.json`` (metadata)."""
    stem = Path(path_stem)
    torch.save(net.state_dict(), stem.with_suffix(".pt"))
    stem.with_suffix(".json").write_text(json.dumps(meta, indent=1, sort_keys=True))


def load_checkpoint(path_stem, fmt: str, version: int, symbols: Sequence[str]) -> tuple[dict, dict]:
    """Metadata and state dict of a checkpoint written by :func:`save_checkpoint`."""
    stem = Path(path_stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    if meta.get("format") != fmt or meta.get("version") != version:
        raise ValueError(f"{stem}: unsupported checkpoint")
    if meta.get("inventory_hash") != inventory_hash(symbols):
        raise ValueError(f"{stem}: checkpoint was trained on a different inventory")
    return meta, torch.load(stem.with_suffix(".pt"))


def batches(n: int, batch_size: int, rng: np.random.Generator, shuffle: bool = True):
    order = rng.permutation(n) if shuffle else np.arange(n)
    for k in range(0, n, batch_size):
        yield order[k:k + batch_size]


def finite_difference_check(params: Sequence[torch.Tensor], loss_fn, n_coords: int | None = None,
                            seed: int = 0, steps: Sequence[float] = (1e-6, 1e-4), floor: float = 1e-7) -> float:
    """Max relative error between autograd and central differences.

    ``params`` must be float64 leaf tensors used by ``loss_fn``.  With
    ``n_coords`` set, a seeded random subset of coordinates is checked.
    Relative error is ``|a - n| / max(|a|, |n|, floor)``, taking for each
    coordinate the best of the central differences at ``steps``: a small step
    is swamped by round-off when the gradient is tiny, a large one can straddle
    a ReLU kink, while a wrong analytic gradient disagrees with both.
    """
    for p in params:
        if p.grad is not None:
            p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = [torch.zeros(p.numel(), dtype=p.dtype) if p.grad is None else p.grad.detach().clone().reshape(-1)
                for p in params]  # unused parameters have no gradient
    coords = [(pi, k) for pi, p in enumerate(params) for k in range(p.numel())]
    if n_coords is not None and n_coords < len(coords):
        rng = np.random.default_rng(seed)
        coords = [coords[i] for i in sorted(rng.choice(len(coords), n_coords, replace=False))]
    worst = 0.0
    with torch.no_grad():
        for pi, k in coords:
            flat = params[pi].view(-1)
            orig = float(flat[k])
            a = float(analytic[pi][k])
            err = np.inf
            for h in steps:
                flat[k] = orig + h
                up = float(loss_fn())
                flat[k] = orig - h
                down = float(loss_fn())
                flat[k] = orig
                num = (up - down) / (2 * h)
                err = min(err, abs(a - num) / max(abs(a), abs(num), floor))
            worst = max(worst, err)
    return worst


__all__ = ["TrainingError", "normalize_frames", "pad_frames", "length_mask", "seeded", "check_finite",
           "n_params", "inventory_hash", "save_checkpoint", "load_checkpoint", "batches", "finite_difference_check", "N_FEATS"]

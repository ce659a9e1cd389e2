import numpy as np
import pytest
import torch

from synthcapt.nn_utils import TrainingError, check_finite, finite_difference_check


class _WrongSquare(torch.autograd.Function):
    """x ** 2 with a backward pass that is off by 1 %."""

    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return x ** 2

    @staticmethod
    def backward(ctx, g):
        (x,) = ctx.saved_tensors
        return g * 2.02 * x


def test_gradient_check_accepts_correct_gradients():
    torch.manual_seed(0)
    w = torch.randn(5, dtype=torch.float64, requires_grad=True)
    assert finite_difference_check([w], lambda: (torch.tanh(w) ** 3).sum() + 1e3) < 1e-6


def test_gradient_check_handles_tiny_gradients_and_unused_params():
    w = torch.tensor([0.3, -0.7], dtype=torch.float64, requires_grad=True)
    unused = torch.zeros(3, dtype=torch.float64, requires_grad=True)

    def loss():  # gradients ~5e-7 on a loss of ~50: round-off swamps the smallest step
        return 5e-7 * torch.sin(w).sum() + 50.0

    assert finite_difference_check([w], loss, steps=(1e-6,)) > 1e-3
    assert finite_difference_check([w, unused], loss) < 1e-4


def test_gradient_check_detects_wrong_backward():
    w = torch.tensor([0.3, -1.2, 2.0], dtype=torch.float64, requires_grad=True)
    err = finite_difference_check([w], lambda: _WrongSquare.apply(w).sum())
    assert err == pytest.approx(0.02 / 2.02, rel=1e-3)


def test_check_finite():
    trace = []
    assert check_finite(torch.tensor(1.5), trace, "x") == 1.5
    with pytest.raises(TrainingError):
        check_finite(torch.tensor(float("nan")), trace, "x")

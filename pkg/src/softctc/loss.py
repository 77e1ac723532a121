"""Loss over compiled confusion-network targets.

Runs the same rescaled forward-backward kernel as the plain chain loss; the
only difference is the richer transition matrix and the weighted boundary
vectors of the compiled target.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from . import forward_backward as fb
from .compiler import CompiledTarget
from .types import (
    InfeasibleTarget,
    LossResult,
    PosteriorMatrix,
    ShapeMismatch,
    ValidationError,
)


def _check(y: PosteriorMatrix, target: CompiledTarget) -> None:
    if int(target.state_symbols.max(initial=0)) >= y.vocab_size:
        raise ShapeMismatch("target references symbols outside the posterior columns")


def soft_ctc(
    y: PosteriorMatrix, target: CompiledTarget
) -> tuple[LossResult, fb.ForwardBackwardWorkspace]:
    """Negative log probability of the target distribution and its gradient.

    The value is read at the last frame from the forward pass against the
    final weights; the gradient accumulates state posteriors into vocabulary
    bins with zero emissions contributing zero.
    """
    _check(y, target)
    loss, ws = fb.run_passes(
        y.frames,
        target.transition,
        target.transition_t,
        target.state_symbols,
        target.alpha_hat,
        target.beta_hat,
    )
    grad = fb.gradient(y.frames, ws)
    return LossResult(loss, grad), ws


def soft_ctc_loss(y: PosteriorMatrix, target: CompiledTarget) -> LossResult:
    result, _ = soft_ctc(y, target)
    return result


def soft_ctc_value_at(y: PosteriorMatrix, target: CompiledTarget, t: int) -> float:
    """Target probability evaluated at frame ``t``; constant over frames.

    Diagnostic form of the loss: reassembles the unscaled alpha*beta/q sum at
    one frame from the rescaled passes.  Returns 0.0 for an infeasible
    instance instead of raising, so the invariance check covers that case.
    """
    if not 0 <= t < y.num_frames:
        raise ValidationError(f"frame {t} outside [0, {y.num_frames})")
    _check(y, target)
    try:
        _, ws = fb.run_passes(
            y.frames,
            target.transition,
            target.transition_t,
            target.state_symbols,
            target.alpha_hat,
            target.beta_hat,
        )
    except InfeasibleTarget:
        return 0.0
    return fb.posterior_mass_at(y.frames, ws, t)


def soft_ctc_batch(
    items: Iterable[tuple[PosteriorMatrix, CompiledTarget]]
) -> list[LossResult]:
    """Map the loss over (posterior, target) pairs.

    Items are independent, so callers may shard the list across workers; this
    reference implementation keeps the evaluation sequential.
    """
    return [soft_ctc_loss(y, target) for y, target in items]

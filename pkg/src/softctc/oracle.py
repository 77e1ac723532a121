"""Brute-force reference implementations used to pin down expected values.

Everything here works by exhaustive enumeration over alignment paths or
per-set choices.  None of it shares logic with the recursive fast paths; the
only common ground is the data containers.  Sizes are guarded so a misuse
fails loudly instead of grinding.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable

import numpy as np

from .confusion import ConfusionNetwork
from .types import Labeling, PosteriorMatrix, TooLarge, ValidationError, Vocabulary

MAX_CTC_PATHS = 10**7
MAX_CN_PATHS = 10**6


def kahan_sum(values: Iterable[float]) -> float:
    """Compensated summation; keeps oracle error far below test tolerances."""
    total = 0.0
    carry = 0.0
    for x in values:
        y = float(x) - carry
        t = total + y
        carry = (t - total) - y
        total = t
    return total


def collapse_path(path: Iterable[int], blank: int) -> tuple[int, ...]:
    """Merge repeats, then drop blanks: the many-to-one path-to-labeling map."""
    out: list[int] = []
    prev = None
    for s in path:
        if s != prev:
            out.append(s)
        prev = s
    return tuple(s for s in out if s != blank)


# Path tables keyed by (vocab size, frames, blank): labeling -> array of paths.
# The table depends only on the shape, so it is shared across instances.
_path_tables: dict[tuple[int, int, int], dict[tuple[int, ...], np.ndarray]] = {}


def _path_table(vocab_size: int, frames: int, blank: int) -> dict[tuple[int, ...], np.ndarray]:
    key = (vocab_size, frames, blank)
    table = _path_tables.get(key)
    if table is None:
        grouped: dict[tuple[int, ...], list[tuple[int, ...]]] = {}
        for path in itertools.product(range(vocab_size), repeat=frames):
            grouped.setdefault(collapse_path(path, blank), []).append(path)
        table = {lab: np.array(paths, dtype=np.int64) for lab, paths in grouped.items()}
        _path_tables[key] = table
    return table


def _check_ctc_size(vocab_size: int, frames: int) -> None:
    if vocab_size**frames > MAX_CTC_PATHS:
        raise TooLarge(
            f"{vocab_size}^{frames} paths exceed the {MAX_CTC_PATHS} enumeration guard"
        )


def enumerate_ctc(y: PosteriorMatrix, l: Labeling, v: Vocabulary) -> float:
    """Total probability of ``l``: the sum over every path collapsing to it."""
    if y.vocab_size != len(v):
        raise ValidationError("posterior width does not match vocabulary")
    frames = y.num_frames
    _check_ctc_size(len(v), frames)
    paths = _path_table(len(v), frames, v.blank).get(tuple(l))
    if paths is None:
        return 0.0
    probs = y.frames[np.arange(frames)[None, :], paths].prod(axis=1)
    return kahan_sum(probs.tolist())


def enumerate_cn_paths(cn: ConfusionNetwork) -> list[tuple[Labeling, float]]:
    """Every per-set choice combination with its weight, duplicates kept.

    Combinations that pick null in different sets may yield the same string;
    this is the unmerged (path) convention.
    """
    count = 1
    for s in cn.sets:
        count *= s.size()
    if count > MAX_CN_PATHS:
        raise TooLarge(f"{count} combinations exceed the {MAX_CN_PATHS} enumeration guard")
    choice_lists = []
    for s in cn.sets:
        choices: list[tuple[int | None, float]] = sorted(s.alternatives.items())
        if s.null > 0.0:
            choices.append((None, s.null))
        choice_lists.append(choices)
    out: list[tuple[Labeling, float]] = []
    for combo in itertools.product(*choice_lists):
        symbols = tuple(sym for sym, _ in combo if sym is not None)
        weight = 1.0
        for _, w in combo:
            weight *= w
        out.append((Labeling(symbols), weight))
    return out


def enumerate_cn_strings(cn: ConfusionNetwork) -> list[tuple[Labeling, float]]:
    """Distinct strings with summed weights (merged convention), sorted."""
    merged: dict[tuple[int, ...], list[float]] = {}
    for labeling, weight in enumerate_cn_paths(cn):
        merged.setdefault(labeling.symbols, []).append(weight)
    return [
        (Labeling(sym), kahan_sum(ws)) for sym, ws in sorted(merged.items())
    ]


def oracle_softctc(y: PosteriorMatrix, cn: ConfusionNetwork, v: Vocabulary) -> float:
    """Probability of the network: weight-sum of per-variant path probabilities.

    Iterates the unmerged combinations so the value is literally
    sum(weight * enumerate_ctc(string)); identical strings are memoized, which
    cannot change the summation order.
    """
    cache: dict[tuple[int, ...], float] = {}
    terms = []
    for labeling, weight in enumerate_cn_paths(cn):
        key = labeling.symbols
        if key not in cache:
            cache[key] = enumerate_ctc(y, labeling, v)
        terms.append(weight * cache[key])
    return kahan_sum(terms)


def finite_difference_grad(
    f: Callable[[PosteriorMatrix], float], y: PosteriorMatrix, step: float = 1e-6
) -> np.ndarray:
    """Central-difference gradient of ``f`` over the raw posterior entries.

    Rows are perturbed without renormalization, so ``f`` must accept matrices
    whose rows do not sum to one.
    """
    if not 1e-8 <= step <= 1e-4:
        raise ValidationError(f"step {step!r} outside [1e-8, 1e-4]")
    base = np.array(y.frames, dtype=np.float64)
    grad = np.zeros_like(base)
    for t in range(base.shape[0]):
        for k in range(base.shape[1]):
            plus = base.copy()
            plus[t, k] += step
            minus = base.copy()
            minus[t, k] -= step
            grad[t, k] = (
                f(PosteriorMatrix(plus)) - f(PosteriorMatrix(minus))
            ) / (2.0 * step)
    return grad

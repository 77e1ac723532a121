"""Decoding posteriors into labelings, n-best lists, and confusion networks.

The beam search keeps per-prefix blank and non-blank mass (log domain) and
merges paths as soon as they collapse to the same prefix, so hypothesis
weights are accumulated posterior mass and never exceed the true posterior
of the labeling.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .confusion import ConfusionNetwork, ConfusionSet, build_cn, normalize_cn
from .types import Labeling, NBestList, PosteriorMatrix, ValidationError, Vocabulary

NEG_INF = float("-inf")


@dataclass(frozen=True)
class DecodeConfig:
    """Beam width, line strategy, and the confidence threshold.

    ``full`` decodes the whole line with one beam search; ``partial`` splits
    the line at confident blanks and only beam-decodes the ambiguous spans.
    """

    beam_size: int = 16
    strategy: str = "partial"
    confidence: float = 0.99

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValidationError("beam size must be at least 1")
        if self.strategy not in ("full", "partial"):
            raise ValidationError(f"unknown strategy {self.strategy!r}")
        if not 0.5 <= self.confidence < 1.0:
            raise ValidationError("confidence threshold must be in [0.5, 1)")


@dataclass(frozen=True)
class Segment:
    """Half-open frame range [start, end) and whether it is confident."""

    start: int
    end: int
    confident: bool

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValidationError(f"bad segment bounds [{self.start}, {self.end})")


def greedy_decode(y: PosteriorMatrix, v: Vocabulary) -> Labeling:
    """Best path decode: frame-wise argmax, collapse repeats, drop blanks."""
    path = np.argmax(y.frames, axis=1)
    out: list[int] = []
    prev = -1
    for s in path:
        if s != prev:
            out.append(int(s))
        prev = s
    return Labeling(tuple(s for s in out if s != v.blank))


def _greedy_path_mass(y: np.ndarray) -> float:
    """Probability of the single argmax path; a lower bound on its labeling."""
    return float(np.prod(np.max(y, axis=1)))


def prefix_beam_search(y: PosteriorMatrix, v: Vocabulary, beam_size: int) -> NBestList:
    """Top labelings by accumulated posterior mass.

    Standard prefix search over (blank, non-blank) mass pairs: extending a
    prefix with its own last symbol needs the blank share, repeating it
    without a blank keeps the prefix unchanged.  Returned weights are the
    total collected mass per prefix, sorted descending; ties break on the
    symbol tuple so the output is reproducible.
    """
    if beam_size < 1:
        raise ValidationError("beam size must be at least 1")
    frames = y.frames
    with np.errstate(divide="ignore"):
        log_y = np.log(frames)
    blank = v.blank
    letters = [k for k in range(len(v)) if k != blank]

    beams: dict[tuple[int, ...], tuple[float, float]] = {(): (0.0, NEG_INF)}
    for t in range(frames.shape[0]):
        row = log_y[t]
        grown: dict[tuple[int, ...], list[float]] = defaultdict(lambda: [NEG_INF, NEG_INF])
        for prefix, (lp_b, lp_nb) in beams.items():
            total = np.logaddexp(lp_b, lp_nb)
            entry = grown[prefix]
            entry[0] = np.logaddexp(entry[0], total + row[blank])
            if prefix:
                entry[1] = np.logaddexp(entry[1], lp_nb + row[prefix[-1]])
            for k in letters:
                lp = row[k]
                if lp == NEG_INF:
                    continue
                extended = grown[prefix + (k,)]
                if prefix and k == prefix[-1]:
                    extended[1] = np.logaddexp(extended[1], lp_b + lp)
                else:
                    extended[1] = np.logaddexp(extended[1], total + lp)
        ranked = sorted(
            grown.items(),
            key=lambda kv: (-np.logaddexp(kv[1][0], kv[1][1]), kv[0]),
        )
        beams = {p: (m[0], m[1]) for p, m in ranked[:beam_size]}

    scored = sorted(
        ((p, float(np.logaddexp(b, nb))) for p, (b, nb) in beams.items()),
        key=lambda kv: (-kv[1], kv[0]),
    )
    entries = [
        (Labeling(p), math.exp(lm)) for p, lm in scored if math.exp(lm) > 0.0
    ]
    if not entries:
        # all mass underflowed; keep the top prefix with a representable weight
        entries = [(Labeling(scored[0][0]), 5e-324)]
    return NBestList(tuple(entries))


def segment_line(y: PosteriorMatrix, v: Vocabulary, threshold: float = 0.99) -> list[Segment]:
    """Partition frames into confident and unconfident segments.

    A frame is a confident blank when the blank exceeds the threshold and
    unconfident when nothing does.  Unconfident segments are the maximal runs
    between confident blanks that contain at least one unconfident frame;
    line boundaries count as confident blanks.  The result covers [0, T)
    without gaps or overlaps.
    """
    frames = y.frames
    total = frames.shape[0]
    conf_blank = frames[:, v.blank] > threshold
    unconfident = frames.max(axis=1) <= threshold

    boundaries = [-1] + [int(t) for t in np.flatnonzero(conf_blank)] + [total]
    marks = np.zeros(total, dtype=bool)  # True marks frames of unconfident segments
    for left, right in zip(boundaries[:-1], boundaries[1:]):
        if right - left > 1 and unconfident[left + 1 : right].any():
            marks[left + 1 : right] = True

    segments: list[Segment] = []
    start = 0
    for t in range(1, total + 1):
        if t == total or marks[t] != marks[start]:
            segments.append(Segment(start, t, confident=not marks[start]))
            start = t
    return segments


def _segment_nbest(y_slice: np.ndarray, v: Vocabulary, beam_size: int) -> NBestList:
    """Beam search a slice, guaranteeing the greedy labeling is represented.

    The beam can prune the greedy prefix mid-line; when that happens the
    greedy labeling is appended with its argmax-path mass, a valid
    under-estimate of its posterior.
    """
    sliced = PosteriorMatrix(y_slice)
    nbest = prefix_beam_search(sliced, v, beam_size)
    greedy = greedy_decode(sliced, v)
    if not any(lab.symbols == greedy.symbols for lab, _ in nbest):
        mass = max(_greedy_path_mass(y_slice), 5e-324)
        nbest = NBestList(tuple(nbest.entries) + ((greedy, mass),))
    return nbest


def decode_to_cn(
    y: PosteriorMatrix, v: Vocabulary, cfg: DecodeConfig, normalize: bool = True
) -> ConfusionNetwork:
    """Decode a line into a confusion network.

    Full strategy: one beam search over the line.  Partial strategy: beam
    search only the unconfident segments, transcribe confident ones greedily
    into singleton sets, and concatenate in frame order.  With ``normalize``
    off, the per-set totals of every segment are scaled to the product of the
    segment beam masses, so the raw network conserves one line-level
    confidence score that later merging can weight by.
    """
    if cfg.strategy == "full":
        parts: list[tuple[NBestList | None, Labeling | None]] = [
            (_segment_nbest(y.frames, v, cfg.beam_size), None)
        ]
    else:
        parts = []
        for seg in segment_line(y, v, cfg.confidence):
            y_slice = y.frames[seg.start : seg.end]
            if seg.confident:
                parts.append((None, greedy_decode(PosteriorMatrix(y_slice), v)))
            else:
                parts.append((_segment_nbest(y_slice, v, cfg.beam_size), None))

    if normalize:
        sets: list[ConfusionSet] = []
        for nbest, labeling in parts:
            if nbest is None:
                sets.extend(ConfusionSet({s: 1.0}) for s in labeling)
            else:
                sets.extend(build_cn(nbest, normalize=True).sets)
        return ConfusionNetwork(tuple(sets), normalized=True)

    masses = [nb.total_weight for nb, _ in parts if nb is not None]
    line_confidence = max(float(np.prod(masses)) if masses else 1.0, 5e-324)
    sets = []
    for nbest, labeling in parts:
        if nbest is None:
            sets.extend(ConfusionSet({s: line_confidence}) for s in labeling)
            continue
        cn = build_cn(nbest, normalize=False)
        factor = line_confidence / cn.total_score
        for s in cn.sets:
            scaled = {k: max(val * factor, 5e-324) for k, val in s.alternatives.items()}
            sets.append(ConfusionSet(scaled, s.null * factor))
    return ConfusionNetwork(tuple(sets), normalized=False, total_score=line_confidence)

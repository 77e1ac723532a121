"""Alignment-free sequence losses over soft transcription targets.

The plain loss scores one labeling; the soft variant scores a whole
distribution of variants encoded as a confusion network, compiled once into
a sparse transition matrix and evaluated by the same forward-backward kernel
at a cost independent of the number of variants.
"""

from .compiler import (
    CharacterConfusionGroup,
    CompiledTarget,
    TranscriptionConfusionModel,
    build_tcm,
    compile_cn,
    compile_nbest,
    compile_tcm,
    initial_vectors,
)
from .confusion import (
    ConfusionNetwork,
    ConfusionSet,
    best_path,
    build_cn,
    count_variant_paths,
    levenshtein_align,
    merge_cns,
    normalize_cn,
    outlier_metric,
    prune,
    smooth,
    trivial_cn,
)
from .ctc import (
    ForwardBackwardWorkspace,
    LinearTarget,
    build_linear_transition_matrix,
    ctc_forward_backward,
    ctc_loss,
    multi_ctc,
)
from .decoding import (
    DecodeConfig,
    Segment,
    decode_to_cn,
    greedy_decode,
    prefix_beam_search,
    segment_line,
)
from .loss import soft_ctc, soft_ctc_batch, soft_ctc_loss, soft_ctc_value_at
from .types import (
    DegenerateSet,
    InfeasibleTarget,
    Labeling,
    LossResult,
    NBestList,
    NegativeEntry,
    PosteriorMatrix,
    RowNotNormalized,
    ShapeMismatch,
    TooLarge,
    ValidationError,
    Vocabulary,
    validate_posteriors,
)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"

"""Stitch isolated sign-language dictionary signs into continuous 3D pose sequences."""

__version__ = "0.1.0"

from .cutoff import SpectralComparison, estimate_cutoff, spectral_difference, spectral_intersection
from .dictionary import (
    EmbeddingTable,
    FaceDictionary,
    Resolution,
    SignDictionary,
    lookup,
    lookup_face,
    normalize_gloss,
)
from .dsp import FilterSpec, ScalarSeries, butterworth_lowpass, magnitude_spectrum, resample_linear
from .metrics import DtwResult, dtw_mje
from .skeleton import (
    CanonicalSkeleton,
    Joint,
    JointAngleSequence,
    PoseSequence,
    forward_kinematics,
    load_skeleton,
    normalize_orientation,
    save_skeleton,
    upper_body_skeleton,
)
from .stitcher import (
    CropParams,
    GlossScript,
    PlanEntry,
    StitchParams,
    assemble,
    attach_face,
    crop_sign,
    plan_transition,
    run_pipeline,
    synthesize_transition,
)

"""Python bindings for the ovcal kernels.

The heavy lifting lives in the compiled extension; this package re-exports
the main operations with their C++ names.
"""

from ._core import (
    CategoryTable,
    TeacherSpace,
    alignment_ce,
    bce_mask_loss,
    build_teacher,
    cosine_sim,
    dice_loss,
    grounding_loss,
    group_score,
    hungarian_match,
    l2_distance,
    mask_pool,
    miou_from_maps,
    sample_index,
    split_metrics,
    synonym_scores,
    tgkd,
    tgkd_grad,
    total_loss,
    vanilla_kd,
    video_eval,
    vision_guided_kd,
)

__all__ = [
    "CategoryTable",
    "TeacherSpace",
    "alignment_ce",
    "bce_mask_loss",
    "build_teacher",
    "cosine_sim",
    "dice_loss",
    "grounding_loss",
    "group_score",
    "hungarian_match",
    "l2_distance",
    "mask_pool",
    "miou_from_maps",
    "sample_index",
    "split_metrics",
    "synonym_scores",
    "tgkd",
    "tgkd_grad",
    "total_loss",
    "vanilla_kd",
    "video_eval",
    "vision_guided_kd",
]

"""Clip-level video similarity search."""

from ._core import (
    CLIP_FRAMES,
    DEFAULT_TOPK,
    ConfigError,
    ContractError,
    Error,
    FormatError,
    IntegrityError,
    IoError,
    LookupError,
    MetricError,
    SamplingError,
    ShapeError,
    average_precision,
    chamfer,
    clip_boundaries,
    decode_store,
    dot_count,
    encode_store,
    evaluate,
    fcs_loss,
    ms_loss,
    rank_query,
    read_store,
    shotmix_sample,
    sim_matrix,
    tube_mask,
    topk_cs,
    write_store,
)

__all__ = [name for name in dir() if not name.startswith("_")]

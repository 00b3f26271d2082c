from .config import BackboneConfig
from .extractor import (
    EXTRACT_INVOCATIONS,
    BackboneParams,
    FeatureCache,
    FrameFeatures,
    MaskEncoderParams,
    encode_mask,
    extract,
    init_backbone_params,
    init_mask_encoder_params,
    project,
)
from .memory_bank import MemoryBank, MemoryEntry, assemble_memory

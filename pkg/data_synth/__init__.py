from .config import SPRITE_KINDS, SynthConfig
from .sequences import clip_seeds, make_pretrain_clip, make_sequence, sample_triple_indices, sub_clip
from .sprites import Background, Clip, FrameTransforms, Sprite, render_clip, render_frame
from .transforms import IDENTITY, AffineTransform, TransformRanges, make_rng, sample_transform
from .writer import load_dataset, write_clip, write_dataset

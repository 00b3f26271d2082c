from .model import ModelConfig, SitvosModel, build_model, foreground, load_model, save_model, segment_object
from .segment import SegmentationResult, VideoTask, merge, run_video, segment_frame, task_from_label_map

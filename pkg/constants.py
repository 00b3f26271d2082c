LOG_FILE = "sitvos_run.log"

# Tensor container
SITT_MAGIC = b"SITT"
DTYPE_CODES = {"float32": 0, "float64": 1}
DEFAULT_DTYPE = "float32"
CHECKPOINT_MANIFEST_SUFFIX = ".manifest.json"
CHECKPOINT_FORMAT = "SITT-checkpoint-v1"

# Numerics
LAYER_NORM_EPS = 1e-5
FINITE_DIFF_STEP = 1e-6
BACKBONE_STRIDE = 16

# Model, desk-scale defaults (full scale: C = 256, d_k = 64, decoder width 256)
MODEL_CHANNELS = 32
MODEL_KEY_DIM = 8
DECODER_CHANNELS = 32
STEM_CHANNELS = 8
STAGE_CHANNELS = [16, 32, 64]
MASK_ENCODER_CHANNELS = [8, 16, 32]

# Memory
DEFAULT_MEMORY_FRAMES_N = 7
DEFAULT_EVERY_K = 5
DEFAULT_MEMORY_POLICY = "first-prev"

# Merge
SOFT_AGGREGATION_EPS = 1e-5
MERGE_SOFT_AGGREGATION = "soft_aggregation"
MERGE_ARGMAX = "argmax"

# Metrics
BOUNDARY_TOLERANCE_FRACTION = 0.008

# Training (full-scale recipe unless marked desk)
BASE_LR = 1e-5
POLY_POWER = 0.9
BATCH_SIZE = 4
DESK_CROP = 64
INTERVAL_MAX = 25
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
CROSS_ENTROPY_CLAMP = 1e-7
STAGE_PRETRAIN = "pretrain"
STAGE_MAIN = "main"
STAGE_FULL = "full"
FEEDBACK_PREDICTED = "predicted"
FEEDBACK_GROUND_TRUTH = "ground_truth"
LOSS_FRAMES_BOTH = "both"
LOSS_FRAMES_FIRST = "first"
LOSS_FRAMES_SECOND = "second"

# Files and directories
FRAMES_DIR = "frames"
MASKS_DIR = "masks"
ATTENTION_DIR = "attention"
RUN_MANIFEST_FILE = "manifest.json"
DATASET_MANIFEST_FILE = "dataset.json"
LOSS_CURVE_CSV = "loss_curve.csv"
LOSS_CURVE_PNG = "loss_curve.png"
CHECKPOINT_FILE = "model.sitt"
BENCH_REPORT_JSON = "bench_mem.json"
BENCH_REPORT_TXT = "bench_mem.txt"
PNG_NAME_DIGITS = 5

DEFAULT_BOOTSTRAP_CONFIDENCE_LEVEL = 0.95

SLOW_TESTS_ENV = "SITVOS_SLOW_TESTS"

from .measures import FramePair, boundary, boundary_f, default_tolerance, jaccard, jf_mean
from .report import EvalReport, aggregate, evaluate_sequence

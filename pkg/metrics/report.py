"""
DAVIS-style averaging: frames within an object, objects within a
sequence, then sequences.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from metrics.measures import FramePair, boundary_f, default_tolerance, jaccard, jf_mean
from utils.errors import ContractError, DimensionError

RESULT_COLUMNS = ["sequence", "object_id", "frame", "J", "F"]


def evaluate_sequence(
    sequence: str,
    predicted: Sequence[np.ndarray],
    truth: Mapping[int, np.ndarray],
    object_ids: Optional[List[int]] = None,
    tolerance_px: Optional[float] = None,
) -> pd.DataFrame:
    """
    Per-object per-frame J and F of one sequence.
    Frame 0 is the annotated frame and is not scored; frames without a
    ground-truth map are skipped. Objects default to those of frame 0.
    """
    if 0 not in truth:
        raise ContractError(f"evaluate_sequence: {sequence} has no frame-0 annotation")
    if object_ids is None:
        object_ids = [int(v) for v in np.unique(truth[0]) if v != 0]
    rows = []
    for frame in range(1, len(predicted)):
        if frame not in truth:
            continue
        if predicted[frame].shape != truth[frame].shape:
            raise DimensionError(
                f"evaluate_sequence: {sequence} frame {frame} predicted {predicted[frame].shape}, truth {truth[frame].shape}"
            )
        tolerance = default_tolerance(*truth[frame].shape) if tolerance_px is None else tolerance_px
        for object_id in object_ids:
            pair = FramePair.of(predicted[frame] == object_id, truth[frame] == object_id)
            rows.append([sequence, object_id, frame, jaccard(pair), boundary_f(pair, tolerance)])
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


@dataclass
class EvalReport:
    per_object: pd.DataFrame
    per_sequence: pd.DataFrame
    J: float
    F: float

    @property
    def JF(self) -> float:
        return jf_mean(self.J, self.F)

    def to_dict(self) -> dict:
        per_sequence: Dict[str, dict] = {}
        for sequence, row in self.per_sequence.iterrows():
            objects = self.per_object[self.per_object["sequence"] == sequence]
            per_sequence[str(sequence)] = {
                "per_object": {
                    str(int(obj.object_id)): {"J": float(obj.J), "F": float(obj.F)} for obj in objects.itertuples()
                },
                "J": float(row["J"]),
                "F": float(row["F"]),
                "JF": jf_mean(float(row["J"]), float(row["F"])),
            }
        return {"per_sequence": per_sequence, "global": {"J": self.J, "F": self.F, "JF": self.JF}}


def aggregate(results: pd.DataFrame) -> EvalReport:
    if results is None or results.empty:
        raise ContractError("aggregate: no per-frame results")
    missing = sorted(set(RESULT_COLUMNS) - set(results.columns))
    if missing:
        raise ContractError(f"aggregate: results lack columns {missing}")
    per_object = results.groupby(["sequence", "object_id"], as_index=False)[["J", "F"]].mean()
    per_sequence = per_object.groupby("sequence")[["J", "F"]].mean()
    report = EvalReport(
        per_object=per_object,
        per_sequence=per_sequence,
        J=float(per_sequence["J"].mean()),
        F=float(per_sequence["F"].mean()),
    )
    logging.debug(f"aggregate: {len(per_sequence)} sequences, J={report.J}, F={report.F}")  # pylint: disable=W1203
    return report

import logging
import os
from typing import Dict

import numpy as np

from tensor_core.serialization import write_tensor_file
from tensor_core.tensor import Tensor


def dump_attention_maps(
    attention: Dict[str, np.ndarray], directory: str, frame_index: int, object_id: int
) -> None:
    """
    Write every block's attention map as a SITT container:
    <directory>/f<frame>_o<object>_<block>.sitt
    """
    os.makedirs(directory, exist_ok=True)
    for block_name, weights in attention.items():
        file_name = os.path.join(directory, f"f{frame_index:05d}_o{object_id}_{block_name}.sitt")
        write_tensor_file(Tensor(weights), file_name)
    logging.debug(  # pylint: disable=W1203
        f"dump_attention_maps: {len(attention)} maps for {frame_index=}, {object_id=}"
    )

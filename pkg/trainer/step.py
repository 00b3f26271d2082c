"""
One training clip: frame 0 with its ground-truth masks is the memory,
frame 1 is predicted and fed back (predicted or ground-truth mask),
frame 2 is predicted from frames 0 and 1.
"""
import logging
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from backbone.extractor import encode_mask, extract
from constants import FEEDBACK_PREDICTED, LOSS_FRAMES_BOTH, LOSS_FRAMES_FIRST, LOSS_FRAMES_SECOND
from data_synth.sprites import Clip
from pipeline.model import SitvosModel, foreground, segment_object
from pipeline.segment import merge
from tensor_core.ops import add, concat_rows, scale
from tensor_core.tensor import Tape, Tensor, backward, suspended_tape
from trainer.config import TrainConfig
from trainer.loss import cross_entropy
from trainer.optim import OptimizerState, optimizer_step
from utils.errors import ContractError


def _mask_tensor(mask: np.ndarray, dtype: str) -> Tensor:
    return Tensor((np.asarray(mask) > 0)[None].astype(np.float64), dtype=dtype)


def clip_loss(model: SitvosModel, clip: Clip, config: TrainConfig) -> Tuple[Tensor, List[float]]:
    """
    Differentiable loss of a 3-frame clip, averaged over its objects.
    Returns the loss and the per-frame loss values (frames 1 and 2).
    """
    if len(clip) != 3:
        raise ContractError(f"clip_loss: expected a 3-frame clip, got {len(clip)} frames")
    if not clip.object_ids:
        raise ContractError("clip_loss: clip has no objects")
    dtype = model.config.dtype
    object_ids = sorted(clip.object_ids)
    features = [extract(Tensor(frame.data, dtype=dtype), model.backbone) for frame in clip.frames]

    first_embeddings = {
        object_id: encode_mask(_mask_tensor(clip.mask(0, object_id), dtype), model.mask_encoder)
        for object_id in object_ids
    }
    losses_1, probs_1 = {}, {}
    for object_id in object_ids:
        probs, _ = segment_object(model, features[1], features[0].embedding, first_embeddings[object_id])
        probs_1[object_id] = probs
        losses_1[object_id] = cross_entropy(probs, clip.mask(1, object_id))

    if config.feedback == FEEDBACK_PREDICTED:
        with suspended_tape():
            labels = merge({object_id: foreground(p) for object_id, p in probs_1.items()})
        feedback = {object_id: (labels == object_id) for object_id in object_ids}
    else:
        feedback = {object_id: clip.mask(1, object_id) for object_id in object_ids}

    m_ori = concat_rows([features[0].embedding, features[1].embedding])
    losses_2 = {}
    for object_id in object_ids:
        second_embedding = encode_mask(_mask_tensor(feedback[object_id], dtype), model.mask_encoder)
        m_e = concat_rows([first_embeddings[object_id], second_embedding])
        probs, _ = segment_object(model, features[2], m_ori, m_e)
        losses_2[object_id] = cross_entropy(probs, clip.mask(2, object_id))

    terms = []
    for object_id in object_ids:
        if config.loss_frames == LOSS_FRAMES_BOTH:
            terms.append(add(losses_1[object_id], losses_2[object_id]))
        elif config.loss_frames == LOSS_FRAMES_FIRST:
            terms.append(losses_1[object_id])
        elif config.loss_frames == LOSS_FRAMES_SECOND:
            terms.append(losses_2[object_id])
    total = terms[0]
    for term in terms[1:]:
        total = add(total, term)
    per_frame = [
        float(np.mean([losses_1[o].item() for o in object_ids])),
        float(np.mean([losses_2[o].item() for o in object_ids])),
    ]
    return scale(total, 1.0 / len(object_ids)), per_frame


def accumulate_clip_gradients(
    model: SitvosModel, clips: Union[Clip, Sequence[Clip]], config: TrainConfig
) -> float:
    """
    Add the gradient of the batch-mean loss to every parameter's gradient.
    Clips are processed in order so the reduction is deterministic.
    """
    clips = [clips] if isinstance(clips, Clip) else list(clips)
    if not clips:
        raise ContractError("accumulate_clip_gradients: empty batch")
    total = 0.0
    for clip in clips:
        with Tape() as tape:
            loss, _ = clip_loss(model, clip, config)
            weighted = scale(loss, 1.0 / len(clips))
        backward(tape, weighted)
        total += loss.item()
    return total / len(clips)


def train_clip_step(
    model: SitvosModel,
    clips: Union[Clip, Sequence[Clip]],
    config: TrainConfig,
    state: OptimizerState,
    lr: float,
) -> float:
    model.zero_grad()
    loss = accumulate_clip_gradients(model, clips, config)
    optimizer_step(model.parameters(), state, lr)
    logging.debug(f"train_clip_step: optimizer step {state.step}, {lr=}, {loss=}")  # pylint: disable=W1203
    return loss


def gradient_norms(model: SitvosModel) -> Dict[str, float]:
    """
    Gradient L2 norm per parameter group (first component of the name,
    with transformer blocks kept apart).
    """
    norms: Dict[str, float] = {}
    for name, parameter in model.named_parameters().items():
        parts = name.split(".")
        group = ".".join(parts[:2]) if parts[0] == "transformer" else parts[0]
        norms[group] = norms.get(group, 0.0) + float(np.sum(parameter.gradient.data.astype(np.float64) ** 2))
    return {group: float(np.sqrt(value)) for group, value in norms.items()}

from dataclasses import dataclass, field
from typing import Iterable, List, Tuple

from backbone.extractor import FrameFeatures
from tensor_core.ops import concat_rows
from tensor_core.tensor import Tensor
from utils.errors import ContractError, DimensionError, MemoryLookupError


@dataclass
class MemoryEntry:
    frame_index: int
    features: FrameFeatures
    mask_embedding: Tensor


@dataclass
class MemoryBank:
    """
    Ordered cached frames of one object. Which entries take part
    in a step is decided by the memory_manager policy.
    """

    entries: List[MemoryEntry] = field(default_factory=list)

    def append(self, frame_index: int, features: FrameFeatures, mask_embedding: Tensor) -> None:
        if self.entries and frame_index <= self.entries[-1].frame_index:
            raise ContractError(
                f"MemoryBank.append: {frame_index=} must exceed last index {self.entries[-1].frame_index}"
            )
        if mask_embedding.shape != features.embedding.shape:
            raise DimensionError(
                f"MemoryBank.append: mask embedding {mask_embedding.shape} != frame embedding {features.embedding.shape}"
            )
        if self.entries and features.embedding.shape != self.entries[0].features.embedding.shape:
            raise DimensionError(
                f"MemoryBank.append: embedding {features.embedding.shape} differs from bank {self.entries[0].features.embedding.shape}"
            )
        self.entries.append(MemoryEntry(frame_index, features, mask_embedding))

    def indices(self) -> List[int]:
        return [entry.frame_index for entry in self.entries]

    def get(self, frame_index: int) -> MemoryEntry:
        for entry in self.entries:
            if entry.frame_index == frame_index:
                return entry
        raise MemoryLookupError(f"MemoryBank.get: {frame_index=} not in bank {self.indices()}")

    def __len__(self) -> int:
        return len(self.entries)


def assemble_memory(bank: MemoryBank, selected: Iterable[int]) -> Tuple[Tensor, Tensor]:
    """
    Stack the selected frames along time in ascending frame order:
    returns (M_ori, M_E), both T·HW × C.
    """
    ordered = sorted(set(selected))
    if not ordered:
        raise ContractError("assemble_memory: no frames selected")
    entries = [bank.get(index) for index in ordered]
    m_ori = concat_rows([entry.features.embedding for entry in entries])
    m_e = concat_rows([entry.mask_embedding for entry in entries])
    return m_ori, m_e

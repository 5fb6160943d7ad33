from collections.abc import Iterable
from dataclasses import dataclass, field

from typing_extensions import Self

from tessera.exceptions import InvalidMicroClusterError, InvalidSequenceError

from .common import SymbolSequence, Timestamp, as_sequence, decay_factor


@dataclass(slots=True)
class MicroCluster:
    """A compact summary `(t, w, SE, SW)` standing in for every sequence merged into it.

    `sequence` is the model sequence (SE) and `weights` its per-character weights (SW).
    `cluster_id` is a stable identity that survives merges and store reordering.
    """

    t: Timestamp
    w: float
    sequence: SymbolSequence
    weights: tuple[float, ...]
    cluster_id: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        try:
            self.sequence = as_sequence(self.sequence)
        except InvalidSequenceError as e:
            raise InvalidMicroClusterError(f"Invalid model sequence: {e}") from e
        self.weights = tuple(float(weight) for weight in self.weights)
        if len(self.sequence) != len(self.weights):
            raise InvalidMicroClusterError(
                f"A model sequence of length {len(self.sequence)} needs exactly as many weights "
                f"but got {len(self.weights)}."
            )
        if any(weight <= 0 for weight in self.weights):
            raise InvalidMicroClusterError(f"Character weights must be positive but got {list(self.weights)}.")
        if self.w < 0:
            raise InvalidMicroClusterError(f"Cluster weight must be non-negative but got {self.w}.")

    @classmethod
    def from_sequence(cls, symbols: Iterable[int], t: Timestamp, *, cluster_id: int = 0) -> Self:
        sequence = tuple(symbols)
        return cls(t=t, w=1.0, sequence=sequence, weights=(1.0,) * len(sequence), cluster_id=cluster_id)

    def __len__(self) -> int:
        return len(self.sequence)

    @property
    def max_weight(self) -> float:
        return max(self.weights, default=0.0)

    def decay_to(self, t_now: Timestamp, lambda_: float) -> float:
        """Fade `w` and every character weight by the same ratio up to `t_now`"""
        factor = decay_factor(t_now, self.t, lambda_)
        if factor != 1.0:
            self.w *= factor
            self.weights = tuple(weight * factor for weight in self.weights)
        self.t = t_now
        return factor

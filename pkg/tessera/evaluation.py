"""Correct clustering rate and the experiment drivers built on it.

The correct clustering rate needs a correspondence between learned models and ground-truth
labels. Each model is attributed to the label most of its sequences carry (the first seen label
wins ties). A label can end up attributed to several fragment models; only the one holding most
of that label's sequences represents it, so splitting a behavior over many models is penalized
exactly like mixing behaviors inside one model.
"""

import statistics
import time
from collections import Counter
from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

from tessera.clustering import ClusterNode
from tessera.exceptions import EmptyAssignmentLogError, TesseraStructureError
from tessera.structure import Hyperparams, Timestamp
from tessera.synthesis import LabeledSequence, SequenceFixture, standard_sequence_fixture

DEFAULT_WINDOW = 30
DEFAULT_REPEATS = 10
SWEEP_PARAMS = Hyperparams.model_validate({"lambda": 1e-2, "mu": 10, "t_gap": 20})


@dataclass(frozen=True, slots=True)
class Assignment:
    sequence_id: int
    label: int
    matched_model: int
    t: Timestamp


@dataclass(slots=True)
class AssignmentLog:
    """One entry per finalized sequence. `matched_model` is the model's stable cluster id."""

    entries: list[Assignment] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Assignment]:
        return iter(self.entries)

    def record(self, sequence_id: int, label: int, matched_model: int, t: Timestamp) -> Assignment:
        assignment = Assignment(sequence_id, label, matched_model, t)
        self.entries.append(assignment)
        return assignment

    def resolved(self, resolve: Callable[[int], int]) -> "AssignmentLog":
        """A copy with every model id mapped through `resolve`, e.g. to the model that absorbed it"""
        return AssignmentLog(
            [Assignment(entry.sequence_id, entry.label, resolve(entry.matched_model), entry.t) for entry in self]
        )

    def tail(self, window: int) -> "AssignmentLog":
        return AssignmentLog(self.entries[-window:])


def ccr(log: Iterable[Assignment]) -> float:
    entries = list(log)
    if not entries:
        raise EmptyAssignmentLogError("The correct clustering rate is undefined for an empty assignment log.")
    labels_by_model: dict[int, Counter[int]] = {}
    for entry in entries:
        labels_by_model.setdefault(entry.matched_model, Counter())[entry.label] += 1

    representatives: dict[int, tuple[int, int]] = {}
    for model, labels in labels_by_model.items():
        # max() keeps the first maximal item and Counter keeps first-seen order
        label, count = max(labels.items(), key=lambda item: item[1])
        if label not in representatives or count > representatives[label][1]:
            representatives[label] = (model, count)
    return sum(count for _, count in representatives.values()) / len(entries)


def windowed_ccr(log: AssignmentLog, window: int = DEFAULT_WINDOW) -> float:
    if window < 1:
        raise TesseraStructureError(f"The window must hold at least one sequence but got {window}.")
    return ccr(log.tail(window))


def run_clusterer(
    items: Iterable[LabeledSequence], params: Hyperparams, *, node: ClusterNode | None = None
) -> tuple[ClusterNode, AssignmentLog]:
    """Feed labeled sequences to a node, one tick per sequence, logging where each one ended up.

    The node is settled once the stream ends.
    """
    node = node if node is not None else ClusterNode(params=params)
    log = AssignmentLog()
    for sequence_id, item in enumerate(items):
        finalization = node.feed_sequence(item.symbols)
        if finalization is not None:
            log.record(sequence_id, item.label, finalization.cluster_id, finalization.t)
    node.settle()
    return node, log


@dataclass(frozen=True, slots=True)
class CurvePoint:
    n_sequences: int
    ccr: float


def convergence_curve(
    items: Iterable[LabeledSequence], params: Hyperparams, window: int = DEFAULT_WINDOW
) -> list[CurvePoint]:
    """Windowed clustering quality after every finalized sequence, judged by the store at that moment"""
    if window < 1:
        raise TesseraStructureError(f"The window must hold at least one sequence but got {window}.")
    node = ClusterNode(params=params)
    log = AssignmentLog()
    curve: list[CurvePoint] = []
    for sequence_id, item in enumerate(items):
        finalization = node.feed_sequence(item.symbols)
        if finalization is None:
            continue
        log.record(sequence_id, item.label, finalization.cluster_id, finalization.t)
        curve.append(CurvePoint(len(log), ccr(log.tail(window).resolved(node.resolve))))
    return curve


def stabilization_point(curve: Sequence[CurvePoint], threshold: float) -> int | None:
    """The first `n_sequences` from which the curve never drops below `threshold` again"""
    stable_from = None
    for point in curve:
        if point.ccr < threshold:
            stable_from = None
        elif stable_from is None:
            stable_from = point.n_sequences
    return stable_from


@dataclass(frozen=True, slots=True)
class SweepRow:
    epsilon: float
    mean_ccr: float
    variance: float
    mean_models: float
    mean_seconds: float


def sub_seeds(seed: int, repeats: int) -> list[int]:
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(repeats)]


def sweep_epsilon(
    eps_values: Sequence[float],
    *,
    repeats: int = DEFAULT_REPEATS,
    seed: int = 0,
    fixture: Callable[[int], SequenceFixture] = standard_sequence_fixture,
    params: Hyperparams = SWEEP_PARAMS,
) -> list[SweepRow]:
    """Cumulative clustering quality per `epsilon`, averaged over fixtures built from distinct sub-seeds.

    Every `epsilon` sees the same fixtures so rows differ only by the threshold.
    """
    if not eps_values:
        raise TesseraStructureError("At least one epsilon value is needed for a sweep.")
    fixtures = [fixture(sub_seed) for sub_seed in sub_seeds(seed, repeats)]
    rows: list[SweepRow] = []
    for epsilon in eps_values:
        run_params = params.model_copy(update={"epsilon": epsilon})
        scores: list[float] = []
        models: list[int] = []
        seconds: list[float] = []
        for current in fixtures:
            started = time.perf_counter()
            node, log = run_clusterer(current.items, run_params)
            seconds.append(time.perf_counter() - started)
            scores.append(ccr(log.resolved(node.resolve)))
            models.append(len(node.store))
        rows.append(
            SweepRow(
                epsilon=epsilon,
                mean_ccr=statistics.fmean(scores),
                variance=statistics.pvariance(scores),
                mean_models=statistics.fmean(models),
                mean_seconds=statistics.fmean(seconds),
            )
        )
    return rows

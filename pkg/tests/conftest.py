from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import pytest
from pydantic import BaseModel
from pytest_fixture_classes import fixture_class

from tessera._utils import parse_symbols
from tessera.clustering import ClusterNode
from tessera.schemas import dump_records
from tessera.structure import Hyperparams, MicroCluster


def seq(text: str) -> tuple[int, ...]:
    """`seq("23754") == (2, 3, 7, 5, 4)`; letters are hex digits as in first-layer renderings"""
    return parse_symbols(text)


def mc(
    text: str,
    weights: Sequence[float] | None = None,
    *,
    w: float = 1.0,
    t: int = 0,
    cluster_id: int = 0,
) -> MicroCluster:
    symbols = seq(text)
    return MicroCluster(
        t=t,
        w=w,
        sequence=symbols,
        weights=tuple(weights) if weights is not None else (1.0,) * len(symbols),
        cluster_id=cluster_id,
    )


def params(**overrides: Any) -> Hyperparams:
    return Hyperparams.model_validate(overrides)


@fixture_class(name="make_node")
class MakeNode:
    def __call__(
        self, *models: MicroCluster, node_id: int = 1, clock: int = 0, **param_overrides: Any
    ) -> ClusterNode:
        numbered = [
            model if model.cluster_id else MicroCluster(model.t, model.w, model.sequence, model.weights, index)
            for index, model in enumerate(models, start=1)
        ]
        return ClusterNode(node_id, params(**param_overrides), store=numbered, clock=clock)


@fixture_class(name="write_jsonl")
class WriteJsonl:
    tmp_path: Path

    def __call__(self, name: str, records: Iterable[BaseModel | str]) -> Path:
        path = self.tmp_path / name
        path.write_text(
            "".join(
                record if isinstance(record, str) else dump_records([record])
                for record in records
            )
        )
        return path

import re

import pytest

from tessera.encoding import decode_output
from tessera.exceptions import CellContentionError, TesseraStructureError
from tessera.routing import Layer2Input, Pipeline, PipelineSpec, Transfer, iter_ticks, run_pipeline
from tessera.structure import GridSpec, ObjectObservation, Rect
from tests.conftest import params

TWO_CELLS = GridSpec(20, 10, rows=1, cols=2)

# Top-left then top-right of the first cell, then the top-left of the second one
PATH = (Rect(1, 1, 2, 2), Rect(6, 1, 2, 2), Rect(11, 1, 2, 2))


def walk(object_id: int, start: int) -> list[ObjectObservation]:
    return [ObjectObservation(object_id, bbox, start + step) for step, bbox in enumerate(PATH)]


@pytest.fixture
def pipeline() -> Pipeline:
    spec = PipelineSpec(
        grid=TWO_CELLS,
        layer1=params(min_models_for_matching=0),
        layer2=params(min_models_for_matching=0),
    )
    return Pipeline(spec)


def test__pipeline_spec__groups_cells_into_blocks():
    spec = PipelineSpec(grid=GridSpec(40, 40, rows=4, cols=4), block_rows=2, block_cols=2)
    assert spec.layer1_ids == range(1, 17)
    assert spec.layer2_ids == range(17, 21)
    assert [spec.layer2_node_of(cell) for cell in (0, 3, 12, 15)] == [17, 18, 19, 20]
    assert spec.layer2_groups()[17] == (1, 2, 5, 6)


def test__pipeline_spec__uneven_blocks_get_their_own_node():
    spec = PipelineSpec(grid=GridSpec(30, 10, rows=1, cols=3), block_cols=2)
    assert spec.layer2_groups() == {4: (1, 2), 5: (3,)}


def test__pipeline_spec__defaults_to_a_single_upper_node():
    spec = PipelineSpec(grid=TWO_CELLS)
    assert spec.layer2_groups() == {3: (1, 2)}


def test__transfer__releases_inputs_ordered_by_source_and_then_arrival():
    transfer = Transfer()
    items = [Layer2Input(5, 9, 1, 321), Layer2Input(2, 9, 1, 129), Layer2Input(5, 9, 1, 0), Layer2Input(2, 9, 2, 130)]
    for item in items:
        transfer.send(item)
    assert transfer.drain() == [items[1], items[3], items[0], items[2]]
    assert transfer.drain() == []


def test__run_pipeline__routes_matches_and_delimiters_upwards(pipeline: Pipeline):
    results = list(run_pipeline(pipeline, walk(1, 1) + walk(2, 6)))
    assert [result.t for result in results] == list(range(1, 10))
    transfers = [(result.t, item) for result in results for item in result.transfers]
    assert transfers == [
        (4, Layer2Input(2, 3, 1, 0)),
        (6, Layer2Input(1, 3, 2, 65)),
        (8, Layer2Input(2, 3, 2, 129)),
        (9, Layer2Input(2, 3, 2, 0)),
    ]
    assert [decode_output(item.symbol, 64) for _, item in transfers if item.symbol] == [(1, 1), (2, 1)]
    assert [model.sequence for model in pipeline.layer1[1].store] == [(1, 2)]
    assert pipeline.layer1[1].store[0].w == pytest.approx(2**-0.05 + 1)
    assert [model.sequence for model in pipeline.layer2[3].store] == [(65, 129)]


def test__run_pipeline__first_layer_events_follow_emit_on_change(pipeline: Pipeline):
    results = list(run_pipeline(pipeline, walk(1, 1) + walk(2, 6)))
    events = [event for result in results for event in result.layer1]
    assert [(event.t, event.node_id, event.emitted) for event in events] == [(6, 1, True), (7, 1, False), (8, 2, True)]


def test__run_pipeline__is_deterministic():
    observations = walk(1, 1) + walk(2, 3) + walk(3, 8)
    spec = PipelineSpec(grid=TWO_CELLS, layer1=params(min_models_for_matching=0))
    first = list(run_pipeline(Pipeline(spec), observations))
    second = list(run_pipeline(Pipeline(spec), observations))
    assert first == second


def test__pipeline__contention_is_skipped_or_raised():
    spec = PipelineSpec(grid=TWO_CELLS)
    crowded = [ObjectObservation(1, Rect(1, 1, 2, 2), 1), ObjectObservation(2, Rect(6, 6, 2, 2), 1)]
    result = Pipeline(spec).tick(crowded, 1)
    assert result.encoding.events == ()
    assert [contention.cell for contention in result.encoding.contentions] == [0]
    with pytest.raises(CellContentionError, match=re.escape("Cell 0 is occupied by more than one object at tick 1")):
        Pipeline(spec, strict=True).tick(crowded, 1)


def test__pipeline__ticks_never_go_back():
    pipeline = Pipeline(PipelineSpec(grid=TWO_CELLS))
    pipeline.tick([], 5)
    with pytest.raises(TesseraStructureError, match=re.escape("got 4 after 5")):
        pipeline.tick([], 4)


def test__pipeline__nodes_are_numbered_across_layers(pipeline: Pipeline):
    assert sorted(pipeline.nodes) == [1, 2, 3]


def test__iter_ticks__fills_gaps_and_adds_a_trailing_tick():
    first = ObjectObservation(1, Rect(1, 1, 1, 1), 2)
    second = ObjectObservation(1, Rect(1, 1, 1, 1), 4)
    assert list(iter_ticks([second, first])) == [(2, [first]), (3, []), (4, [second]), (5, [])]
    assert list(iter_ticks([])) == []

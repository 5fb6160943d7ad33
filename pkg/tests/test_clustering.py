import re
import time

import numpy as np
import pytest

from tessera.clustering import ClusterNode, Finalization
from tessera.exceptions import ClockError, InvalidSequenceError, TesseraStructureError
from tessera.similarity import model_distance
from tessera.structure import MicroCluster
from tessera.synthesis import NoiseKind, PatternOrder, gen_sequence_stream, standard_sequence_fixture
from tests.conftest import MakeNode, mc, params, seq


def test__ingest_symbol__sample_stream_creates_a_first_model():
    node = ClusterNode(1)
    for t, symbol in enumerate((2, 3, 7, 5, 4, 0), start=1):
        assert node.ingest_symbol(symbol, t) is None
    assert node.store == [mc("23754", t=6)]
    assert node.store[0].cluster_id == 1
    assert node.buffer() == ()
    assert node.stats.models_created == 1


def test__feed_sequence__merges_into_an_identical_model(make_node: MakeNode):
    node = make_node(mc("23754", t=1), min_models_for_matching=0)
    finalization = node.feed_sequence(seq("23754"), 1)
    assert finalization == Finalization(1, 1, 0.0, True, 1, 0, seq("23754"))
    assert len(node.store) == 1
    assert node.store[0].w == 2
    assert node.store[0].weights == (2, 2, 2, 2, 2)
    assert node.stats.merges == 1


def test__feed_sequence__a_far_sequence_creates_a_new_model(make_node: MakeNode):
    node = make_node(mc("ABC"), min_models_for_matching=0)
    finalization = node.feed_sequence(seq("DEF"))
    assert finalization is not None
    assert not finalization.merged
    assert finalization.distance == 1.0
    assert (finalization.cluster_id, finalization.model_index) == (2, 2)
    assert [model.sequence for model in node.store] == [seq("ABC"), seq("DEF")]


def test__feed_sequence__matching_stays_off_until_the_store_is_large_enough(make_node: MakeNode):
    node = make_node()
    for t in (1, 2, 3):
        finalization = node.feed_sequence(seq("23754"), t)
        assert finalization is not None
        assert not finalization.merged
        assert finalization.distance is None
    assert len(node.store) == 3
    finalization = node.feed_sequence(seq("23754"), 4)
    assert finalization is not None
    assert finalization.merged
    assert finalization.model_index == 1


def test__ingest_symbol__repeated_symbols_are_deduplicated():
    node = ClusterNode(1)
    for symbol in (2, 2, 3):
        node.ingest_symbol(symbol, 1)
    assert node.buffer() == (2, 3)
    assert node.stats.symbols == 2


def test__ingest_symbol__rejects_negative_symbols():
    with pytest.raises(InvalidSequenceError, match=re.escape("Symbols must be non-negative but got -3.")):
        ClusterNode(1).ingest_symbol(-3, 1)


def test__finalize__empty_buffers_and_repeated_delimiters_do_nothing():
    node = ClusterNode(1)
    assert node.finalize(1) is None
    node.ingest_symbol(2, 2)
    assert node.finalize(2) is not None
    assert node.finalize(3) is None
    assert len(node.store) == 1


def test__ingest_symbol__time_never_goes_back():
    node = ClusterNode(1, clock=10)
    with pytest.raises(ClockError):
        node.ingest_symbol(2, 9)


def test__cluster_node__rejects_invalid_setup():
    with pytest.raises(TesseraStructureError, match=re.escape("Node ids start at 1")):
        ClusterNode(0)
    with pytest.raises(TesseraStructureError, match=re.escape("Node 1 can hold at most 1 models but 2 were given.")):
        ClusterNode(1, params(m_u=1), store=[mc("12"), mc("34")])


@pytest.mark.parametrize(
    ("stored", "query", "expected"),
    [
        (["23754"], "2354", (1, 0.0)),
        (["23754", "9AB"], "9AB", (2, 0.0)),
        (["ABC"], "DEF", (1, 1.0)),
        (["123", "123"], "12", (1, 0.0)),
    ],
)
def test__match_closest(make_node: MakeNode, stored: list[str], query: str, expected: tuple[int, float]):
    node = make_node(*(mc(text) for text in stored))
    assert node.match_closest(seq(query)) == (expected[0], pytest.approx(expected[1]))


def test__match_closest__with_an_empty_store_is_none():
    assert ClusterNode(1).match_closest(seq("12")) is None


def test__match_closest__follows_a_replaced_model(make_node: MakeNode):
    assert make_node(mc("123")).match_closest(seq("DEF")) == (1, 1.0)
    assert make_node(mc("DEF")).match_closest(seq("DEF")) == (1, 0.0)


def test__predict(make_node: MakeNode):
    node = make_node(mc("23754"))
    assert node.predict(seq("23"), 1) == seq("754")
    with pytest.raises(IndexError, match=re.escape("Model index must be between 1 and 1 but got 2.")):
        node.predict(seq("23"), 2)


def test__ingest_symbol__emits_only_when_the_match_changes(make_node: MakeNode):
    node = make_node(mc("23754"), mc("9AB"), mc("4CEA2"))
    events = [node.ingest_symbol(symbol, 1) for symbol in seq("239AB")]
    assert all(event is not None for event in events)
    assert [(event.model_index, event.emitted) for event in events if event is not None] == [
        (1, True),
        (1, False),
        (1, False),
        (2, True),
        (2, False),
    ]
    second = events[1]
    assert second is not None
    assert second.query == seq("23")
    assert second.predicted_suffix == seq("754")
    assert node.current_match() == 2


def test__ingest_symbol__streams_keep_separate_buffers(make_node: MakeNode):
    node = make_node(mc("23754"), mc("9AB"), mc("4CEA2"))
    first = node.ingest_symbol(9, 1, stream=7)
    second = node.ingest_symbol(4, 1, stream=8)
    assert first is not None
    assert second is not None
    assert (first.stream, first.model_index, first.emitted) == (7, 2, True)
    assert (second.stream, second.model_index, second.emitted) == (8, 1, True)
    assert node.buffer(7) == (9,)
    assert node.buffer(8) == (4,)
    assert node.buffer(9) == ()
    finalization = node.finalize(2, stream=7)
    assert finalization is not None
    assert finalization.stream == 7
    assert node.buffer(8) == (4,)


def test__cleanup__forgets_a_model_untouched_for_two_gaps(make_node: MakeNode):
    node = make_node(mc("123", t=0), mc("456", t=39))
    node.cleanup(40)
    assert [model.sequence for model in node.store] == [seq("456")]
    assert node.stats.removed_models == 1


def test__cleanup__keeps_a_model_younger_than_a_gap(make_node: MakeNode):
    node = make_node(mc("123", t=0))
    node.cleanup(10)
    (model,) = node.store
    assert (model.sequence, model.t) == (seq("123"), 10)
    assert model.w == pytest.approx(2**-0.1)
    assert model.weights == pytest.approx((2**-0.1,) * 3)


def test__cleanup__cuts_characters_far_below_the_heaviest(make_node: MakeNode):
    node = make_node(mc("1234", [12, 11, 1, 12], w=5, t=20))
    node.cleanup(20)
    assert node.store == [mc("124", [12, 11, 12], w=5, t=20)]
    assert node.stats.removed_characters == 1


def test__cleanup__collapses_runs_left_by_removed_characters(make_node: MakeNode):
    node = make_node(mc("121", [12, 1, 12], w=5, t=20))
    node.cleanup(20)
    assert node.store == [mc("1", [24], w=5, t=20)]


def test__cleanup__merges_identical_models_into_the_heavier(make_node: MakeNode):
    node = make_node(mc("123", w=3, t=20), mc("123", w=2, t=20), mc("9AB", t=20))
    node.cleanup(20)
    assert [(model.sequence, model.w, model.cluster_id) for model in node.store] == [
        (seq("123"), 5, 1),
        (seq("9AB"), 1, 3),
    ]
    assert node.store[0].weights == (2, 2, 2)
    assert node.resolve(2) == 1
    assert node.index_of(2) == 1
    assert node.stats.cleanup_merges == 1


def test__advance__runs_every_due_cleanup_once(make_node: MakeNode):
    node = make_node(mc("123", t=0))
    node.advance(19)
    assert node.stats.cleanups == 0
    node.advance(20)
    node.advance(20)
    assert node.stats.cleanups == 1
    node.advance(65)
    assert node.stats.cleanups == 3


def test__feed_sequence__a_model_reinforced_every_gap_survives_a_hundred_cleanups(make_node: MakeNode):
    node = make_node(min_models_for_matching=0)
    for cycle in range(101):
        node.feed_sequence(seq("4CEA2"), 20 * cycle + 10)
    assert node.stats.cleanups == 100
    assert [model.sequence for model in node.store] == [seq("4CEA2")]
    assert node.stats.removed_models == 0


def test__finalize__evicts_the_lightest_model_when_full():
    node = ClusterNode(1, params(m_u=2, min_models_for_matching=5))
    for t, text in enumerate(("123", "456", "789"), start=1):
        node.feed_sequence(seq(text), t)
    assert [model.sequence for model in node.store] == [seq("456"), seq("789")]
    assert node.stats.evictions == 1
    assert node.index_of(1) is None


@pytest.mark.parametrize("seed", range(5))
def test__settle__leaves_insertion_noise_forgotten(seed: int):
    node = ClusterNode(1, params(epsilon=0.3, lambda_=1e-2, mu=10, t_gap=20))
    stream = gen_sequence_stream([seq("4CEA2")], 50, 0.1, seed, noise_kinds=(NoiseKind.insertion,))
    for item in stream:
        node.feed_sequence(item.symbols)
    node.settle()
    assert [model.sequence for model in node.store] == [seq("4CEA2")]
    weights = node.store[0].weights
    assert min(weights) >= 0.8 * max(weights)


def test__settle__folds_the_models_created_before_matching_started():
    node = ClusterNode(1)
    for _ in range(5):
        node.feed_sequence(seq("23754"))
    assert len(node.store) == 3
    node.settle()
    (model,) = node.store
    assert (model.sequence, model.cluster_id, model.t) == (seq("23754"), 1, 5)
    assert model.w == pytest.approx(sum(2 ** (-0.01 * age) for age in range(5)))
    assert model.weights == pytest.approx((model.w,) * 5)
    assert node.resolve(3) == 1

    node.settle()
    assert node.store == [model]


def test__cleanup__keeps_a_short_model_apart_from_a_longer_one_that_contains_it(make_node: MakeNode):
    short = mc("1234", [5, 5, 5, 5], w=5, t=20)
    long = mc("9182A3B4", [6, 1, 6, 1, 6, 1, 6, 1], w=3, t=20)
    assert model_distance(short, long) == 0.0
    node = make_node(short, long)
    assert node.cleanup(20) == 0
    assert [model.sequence for model in node.store] == [seq("1234"), seq("9182A3B4")]


def test__cleanup__tolerates_an_empty_model(make_node: MakeNode):
    node = make_node(mc(""), mc("78"))
    assert node.match_closest(seq("78")) == (2, 0.0)
    assert make_node(mc("")).match_closest(seq("78")) == (1, 1.0)
    node.cleanup(0)
    assert [model.sequence for model in node.store] == [(), seq("78")]


def test__feed_sequence__matches_symbol_by_symbol_ingestion():
    fixture = standard_sequence_fixture(6, n=120)
    fed = ClusterNode(1)
    ingested = ClusterNode(1)
    for t, item in enumerate(fixture.items, start=1):
        fed.feed_sequence(item.symbols)
        for symbol in (*item.symbols, 0):
            ingested.ingest_symbol(symbol, t)
        ingested.advance(t)
    assert fed.store == ingested.store
    assert fed.stats == ingested.stats


def test__feed_sequence__store_never_exceeds_its_bound():
    node = ClusterNode(1, params(m_u=100, t_gap=200))
    rng = np.random.default_rng(11)
    draws = rng.integers(1, 1000, size=(100_000, 3))
    for row in draws:
        node.feed_sequence([int(symbol) for symbol in row if symbol])
        assert len(node.store) <= 100
    assert node.stats.sequences == 100_000


def test__feed_sequence__is_deterministic():
    fixture = standard_sequence_fixture(3, n=120)

    def run() -> tuple[list[MicroCluster], list[int]]:
        node = ClusterNode(1)
        ids = []
        for item in fixture.items:
            finalization = node.feed_sequence(item.symbols)
            assert finalization is not None
            ids.append(finalization.cluster_id)
        return node.store, ids

    first_store, first_ids = run()
    second_store, second_ids = run()
    assert first_store == second_store
    assert first_ids == second_ids


def test__feed_sequence__keeps_the_store_bounded_on_a_patterned_stream():
    fixture = standard_sequence_fixture(5, n=400)
    node = ClusterNode(1)
    for item in fixture.items:
        node.feed_sequence(item.symbols)
        assert len(node.store) <= node.params.m_u
        assert all(
            first != second for model in node.store for first, second in zip(model.sequence, model.sequence[1:])
        )


def test__ingest_symbol__throughput():
    stream = gen_sequence_stream(
        standard_sequence_fixture(1).patterns, 3000, 0.1, 9, order=PatternOrder.random
    )
    node = ClusterNode(1, params(m_u=100))
    symbols = sum(len(item.symbols) for item in stream)
    start = time.perf_counter()
    for item in stream:
        node.feed_sequence(item.symbols)
    elapsed = time.perf_counter() - start
    assert len(node.store) <= 100
    assert symbols / elapsed >= 50_000

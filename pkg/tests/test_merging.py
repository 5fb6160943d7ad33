from collections.abc import Sequence

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tessera.merging import align_merge, merge, merge_models
from tessera.similarity import DPTable, lcs_brute, lcs_table
from tessera.structure import MicroCluster, drop_repeats
from tests.conftest import mc, seq

sequences = st.lists(st.integers(min_value=1, max_value=15), min_size=1, max_size=8).map(drop_repeats)


@st.composite
def integer_weighted_models(draw: st.DrawFn, *, uniform: bool = False) -> MicroCluster:
    sequence = draw(sequences)
    if uniform:
        weights = [1.0] * len(sequence)
    else:
        drawn = draw(st.lists(st.integers(1, 20), min_size=len(sequence), max_size=len(sequence)))
        weights = [float(w) for w in drawn]
    return MicroCluster(t=0, w=1.0, sequence=sequence, weights=tuple(weights))


def recursive_merge(table: DPTable, mc1: MicroCluster, mc2: MicroCluster, i: int, j: int) -> list[tuple[int, float]]:
    """Straightforward recursive walk of the table, emitting on the way back up"""
    if i == 0 and j == 0:
        return []
    if j == 0:
        return [*recursive_merge(table, mc1, mc2, i - 1, 0), (mc1.sequence[i - 1], mc1.weights[i - 1])]
    if i == 0:
        return [*recursive_merge(table, mc1, mc2, 0, j - 1), (mc2.sequence[j - 1], mc2.weights[j - 1])]
    if table[j, i] == table[j - 1, i]:
        return [*recursive_merge(table, mc1, mc2, i, j - 1), (mc2.sequence[j - 1], mc2.weights[j - 1])]
    if table[j, i] == table[j, i - 1]:
        return [*recursive_merge(table, mc1, mc2, i - 1, j), (mc1.sequence[i - 1], mc1.weights[i - 1])]
    return [
        *recursive_merge(table, mc1, mc2, i - 1, j - 1),
        (mc1.sequence[i - 1], mc1.weights[i - 1] + mc2.weights[j - 1]),
    ]


def is_subsequence(candidate: Sequence[int], sequence: Sequence[int]) -> bool:
    remaining = iter(sequence)
    return all(symbol in remaining for symbol in candidate)


@pytest.mark.parametrize(
    ("mc1", "mc2", "sequence", "weights"),
    [
        (mc("ABC"), mc("ABC"), "ABC", (2, 2, 2)),
        (mc("ABC"), mc("ABD"), "ABCD", (2, 2, 1, 1)),
        (mc("AC", [3, 3]), mc(""), "AC", (3, 3)),
        (mc(""), mc("AC"), "AC", (1, 1)),
    ],
)
def test__merge__aligns_and_interleaves(mc1: MicroCluster, mc2: MicroCluster, sequence: str, weights: tuple):
    merged = merge(mc1, mc2, t_now=9)
    assert merged.sequence == seq(sequence)
    assert merged.weights == weights
    assert merged.w == mc1.w + 1
    assert merged.t == 9


def test__merge__keeps_the_identity_of_the_stored_model():
    merged = merge(mc("123", cluster_id=4, w=3.5), mc("124", cluster_id=9), t_now=1)
    assert merged.cluster_id == 4
    assert merged.w == 4.5


def test__merge__repeating_the_same_input_never_grows_the_model():
    model = merge(mc("ABC"), mc("ABD"), t_now=0)
    for t in range(1, 6):
        model = merge(model, mc("ABD"), t_now=t)
    assert model.sequence == seq("ABCD")
    assert model.weights == (7, 7, 1, 6)


def test__merge_models__adds_cluster_weights():
    merged = merge_models(mc("123", w=5, cluster_id=1), mc("123", w=2, cluster_id=2), t_now=3)
    assert merged.w == 7
    assert merged.cluster_id == 1
    assert merged.weights == (2, 2, 2)


@given(mc1=integer_weighted_models(), mc2=integer_weighted_models())
@settings(max_examples=300)
def test__align_merge__matches_a_recursive_walk(mc1: MicroCluster, mc2: MicroCluster):
    table = lcs_table(mc2.sequence, mc1)
    expected = recursive_merge(table, mc1, mc2, len(mc1), len(mc2))
    symbols, weights = align_merge(mc1, mc2)
    assert list(zip(symbols, weights)) == expected


@given(mc1=integer_weighted_models(), mc2=integer_weighted_models())
@settings(max_examples=300)
def test__merge__conserves_weight_and_contains_both_inputs(mc1: MicroCluster, mc2: MicroCluster):
    symbols, weights = align_merge(mc1, mc2)
    assert is_subsequence(mc1.sequence, symbols)
    assert is_subsequence(mc2.sequence, symbols)
    total = sum(mc1.weights) + sum(mc2.weights)
    assert sum(weights) == total
    assert sum(merge(mc1, mc2, t_now=0).weights) == total


@given(mc1=integer_weighted_models(uniform=True), mc2=integer_weighted_models(uniform=True))
def test__align_merge__length_is_both_lengths_minus_the_lcs(mc1: MicroCluster, mc2: MicroCluster):
    symbols, _ = align_merge(mc1, mc2)
    assert len(symbols) == len(mc1) + len(mc2) - lcs_brute(mc1.sequence, mc2.sequence)


@given(model=integer_weighted_models())
def test__merge__with_an_identical_sequence_doubles_weights(model: MicroCluster):
    merged = merge(model, model, t_now=0)
    assert merged.sequence == model.sequence
    assert merged.weights == tuple(2 * w for w in model.weights)

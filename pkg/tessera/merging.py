from tessera.similarity import DPTable, backtrack, lcs_table
from tessera.structure import MicroCluster, Symbol, Timestamp, collapse_runs


def align_merge(
    mc1: MicroCluster, mc2: MicroCluster, *, table: DPTable | None = None
) -> tuple[list[Symbol], list[float]]:
    """Interleave both model sequences along their weighted alignment before any run collapsing.

    `mc1` is the established model whose weights drive the alignment and `mc2` the incoming one.
    Aligned characters appear once with their weights summed. A `table` already computed for
    `mc2.sequence` against `mc1` is reused instead of being built again.
    """
    if table is None:
        table = lcs_table(mc2.sequence, mc1)
    symbols: list[Symbol] = []
    weights: list[float] = []
    for model_index, query_index in backtrack(table):
        if model_index is None:
            assert query_index is not None
            symbols.append(mc2.sequence[query_index])
            weights.append(mc2.weights[query_index])
        elif query_index is None:
            symbols.append(mc1.sequence[model_index])
            weights.append(mc1.weights[model_index])
        else:
            symbols.append(mc1.sequence[model_index])
            weights.append(mc1.weights[model_index] + mc2.weights[query_index])
    return symbols, weights


def _merged(
    mc1: MicroCluster, mc2: MicroCluster, *, w: float, t_now: Timestamp, table: DPTable | None = None
) -> MicroCluster:
    symbols, weights = collapse_runs(*align_merge(mc1, mc2, table=table))
    return MicroCluster(t=t_now, w=w, sequence=symbols, weights=weights, cluster_id=mc1.cluster_id)


def merge(mc1: MicroCluster, mc2: MicroCluster, t_now: Timestamp, *, table: DPTable | None = None) -> MicroCluster:
    """Fold an incoming sequence cluster `mc2` into the stored model `mc1`.

    The result keeps `mc1`'s identity, gains one unit of cluster weight and is stamped with `t_now`.
    """
    return _merged(mc1, mc2, w=mc1.w + 1, t_now=t_now, table=table)


def merge_models(heavier: MicroCluster, lighter: MicroCluster, t_now: Timestamp) -> MicroCluster:
    """Cleanup-time merge of two established models: cluster weights add up instead of growing by one"""
    return _merged(heavier, lighter, w=heavier.w + lighter.w, t_now=t_now)

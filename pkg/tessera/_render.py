from rich.table import Table

from tessera._utils import render_symbols, render_weights
from tessera.schemas import NodeSnapshot


def render_snapshot(snapshot: NodeSnapshot) -> Table:
    params = snapshot.params
    table = Table(
        title=f"Node {snapshot.node_id} at t={snapshot.clock}",
        caption=(
            f"epsilon={params.epsilon} lambda={params.lambda_} mu={params.mu} "
            f"t_gap={params.t_gap} m_u={params.m_u}"
        ),
    )
    table.add_column("#", justify="right")
    table.add_column("id", justify="right")
    table.add_column("w", justify="right")
    table.add_column("t", justify="right")
    table.add_column("sequence")
    table.add_column("weights")
    for index, model in enumerate(snapshot.models, start=1):
        table.add_row(
            str(index),
            str(model.cluster_id),
            f"{model.w:.3f}",
            str(model.t),
            render_symbols(model.sequence),
            render_weights(model.weights),
        )
    return table

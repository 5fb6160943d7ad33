import csv
import logging
import sys
import time
from pathlib import Path
from typing import Annotated, Any

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from tessera._render import render_snapshot
from tessera._utils import parse_symbols, render_symbols
from tessera.clustering import ClusterNode
from tessera.config import RunConfig, load_config
from tessera.encoding import decode_output
from tessera.evaluation import DEFAULT_REPEATS, DEFAULT_WINDOW, convergence_curve, stabilization_point, sweep_epsilon
from tessera.exceptions import ConfigError, RecordParseError, SnapshotError, TesseraError
from tessera.routing import Pipeline, run_pipeline
from tessera.schemas import (
    AssignmentRecord,
    ContentionRecord,
    MatchRecord,
    ObservationRecord,
    SequenceRecord,
    TransferRecord,
    dump_records,
    load_snapshot,
    read_records,
    save_snapshot,
    write_records,
)
from tessera.synthesis import (
    MAX_NOISE_RATE,
    PatternOrder,
    crossing_patterns,
    gen_point_stream,
    gen_sequence_stream,
    standard_sequence_fixture,
)

if sys.version_info >= (3, 11):  # pragma: no cover
    from enum import StrEnum
else:  # pragma: no cover
    from backports.strenum import StrEnum

_CONSOLE = Console()
_DEFAULT_EPSILONS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]

_CONFIG_ARG = Annotated[
    Path | None, typer.Option("--config", "-c", exists=True, dir_okay=False, help="Flat 'key = value' config file")
]
_EPSILON_ARG = Annotated[float | None, typer.Option(help="Distance threshold for merging")]
_LAMBDA_ARG = Annotated[float | None, typer.Option("--lambda", help="Decay rate of model weights")]
_MU_ARG = Annotated[float | None, typer.Option(help="Weight gap below which characters count as noise")]
_T_GAP_ARG = Annotated[int | None, typer.Option(help="Ticks between cleanups")]
_M_U_ARG = Annotated[int | None, typer.Option(help="Model store capacity per node")]
_MIN_MODELS_ARG = Annotated[int | None, typer.Option(help="Store size that must be exceeded before matching")]
_SEED_ARG = Annotated[int, typer.Option(help="Seed of every random draw")]
_OUTPUT_ARG = Annotated[Path, typer.Option("--output", "-o", dir_okay=False, help="File to write")]


class LogLevel(StrEnum):
    debug = "debug"
    info = "info"
    warning = "warning"
    error = "error"


app = typer.Typer(
    name="tessera",
    add_completion=False,
    help="Unsupervised trajectory clustering with hierarchical sequence micro-clusters",
)

synth_subapp = typer.Typer(
    name="synth",
    add_completion=False,
    help="Generate synthetic labeled data files",
)

app.add_typer(synth_subapp)


def version_callback(value: bool):
    if value:
        from . import __version__

        typer.echo(f"Tessera {__version__}")
        raise typer.Exit


def _fail(error: TesseraError) -> typer.Exit:
    typer.echo(str(error), err=True)
    return typer.Exit(code=1)


def _config(config: Path | None, overrides: dict[str, Any]) -> RunConfig:
    try:
        return load_config(config, overrides)
    except ConfigError as e:
        raise typer.BadParameter(str(e)) from e


def _hyperparam_overrides(
    epsilon: float | None,
    lambda_: float | None,
    mu: float | None,
    t_gap: int | None,
    m_u: int | None,
    min_models: int | None,
) -> dict[str, Any]:
    return {
        "epsilon": epsilon,
        "lambda": lambda_,
        "mu": mu,
        "t_gap": t_gap,
        "m_u": m_u,
        "min_models_for_matching": min_models,
    }


def _summary(title: str, rows: dict[str, Any]) -> Table:
    table = Table(title=title, show_header=False)
    table.add_column("", style="bold")
    table.add_column("", justify="right")
    for name, value in rows.items():
        table.add_row(name, str(value))
    return table


@app.command(
    name="cluster",
    help="Stream labeled symbol sequences through a single node and save the learned models",
    short_help="Cluster a sequence file with one node",
)
def cluster(
    input_path: Annotated[
        Path, typer.Argument(metavar="SEQUENCES", exists=True, dir_okay=False, help="JSON Lines sequence records")
    ],
    snapshot: Annotated[Path, typer.Option(dir_okay=False, help="Where to write the node snapshot")] = Path(
        "snapshot.json"
    ),
    assignments: Annotated[
        Path | None, typer.Option(dir_okay=False, help="Where to write one assignment record per sequence")
    ] = None,
    resume: Annotated[
        Path | None,
        typer.Option(exists=True, dir_okay=False, help="Continue from a snapshot, keeping its hyperparameters"),
    ] = None,
    settle: Annotated[
        bool, typer.Option(help="Clean the store up once more after the last sequence, before saving it")
    ] = True,
    config: _CONFIG_ARG = None,
    epsilon: _EPSILON_ARG = None,
    lambda_: _LAMBDA_ARG = None,
    mu: _MU_ARG = None,
    t_gap: _T_GAP_ARG = None,
    m_u: _M_U_ARG = None,
    min_models: _MIN_MODELS_ARG = None,
) -> None:
    overrides = _hyperparam_overrides(epsilon, lambda_, mu, t_gap, m_u, min_models)
    try:
        if resume is not None:
            if config is not None or any(value is not None for value in overrides.values()):
                raise typer.BadParameter("Hyperparameters cannot be changed when resuming from a snapshot.")
            node = load_snapshot(resume).to_node()
        else:
            node = ClusterNode(1, _config(config, overrides).params)

        records: list[AssignmentRecord] = []
        started = time.perf_counter()
        for sequence_id, record in enumerate(read_records(input_path, SequenceRecord)):
            finalization = node.feed_sequence(record.symbols)
            if finalization is not None:
                records.append(
                    AssignmentRecord(
                        sequence_id=sequence_id,
                        label=record.label,
                        model=finalization.cluster_id,
                        t=finalization.t,
                        merged=finalization.merged,
                    )
                )
        elapsed = time.perf_counter() - started
    except (RecordParseError, SnapshotError) as e:
        raise _fail(e) from e

    if settle:
        node.settle()
    save_snapshot(node, snapshot)
    if assignments is not None:
        write_records(assignments, records)
    stats = node.stats
    _CONSOLE.print(
        _summary(
            "Clustering summary",
            {
                "sequences": stats.sequences,
                "models": len(node.store),
                "models created": stats.models_created,
                "merges": stats.merges,
                "cleanup merges": stats.cleanup_merges,
                "evictions": stats.evictions,
                "cleanups": stats.cleanups,
                "symbols/sec": f"{stats.symbols / elapsed:.0f}" if elapsed > 0 else "n/a",
            },
        )
    )


@app.command(
    name="pipeline",
    help="Run tracked-object observations through the two-layer node pipeline and write its event log",
    short_help="Run the two-layer pipeline",
)
def pipeline(
    input_path: Annotated[
        Path,
        typer.Argument(metavar="OBSERVATIONS", exists=True, dir_okay=False, help="JSON Lines observation records"),
    ],
    output: _OUTPUT_ARG = Path("events.jsonl"),
    strict: Annotated[bool, typer.Option(help="Stop at the first cell claimed by two objects")] = False,
    config: _CONFIG_ARG = None,
    rows: Annotated[int | None, typer.Option(help="Grid rows")] = None,
    cols: Annotated[int | None, typer.Option(help="Grid columns")] = None,
    block_rows: Annotated[int | None, typer.Option(help="Rows of cells per layer-2 node")] = None,
    block_cols: Annotated[int | None, typer.Option(help="Columns of cells per layer-2 node")] = None,
    epsilon: _EPSILON_ARG = None,
    lambda_: _LAMBDA_ARG = None,
    mu: _MU_ARG = None,
    t_gap: _T_GAP_ARG = None,
    m_u: _M_U_ARG = None,
    min_models: _MIN_MODELS_ARG = None,
) -> None:
    overrides = _hyperparam_overrides(epsilon, lambda_, mu, t_gap, m_u, min_models) | {
        "grid.rows": rows,
        "grid.cols": cols,
        "layer2.block_rows": block_rows,
        "layer2.block_cols": block_cols,
    }
    run_config = _config(config, overrides)
    try:
        spec = run_config.pipeline_spec()
    except ConfigError as e:
        raise typer.BadParameter(str(e)) from e

    runner = Pipeline(spec, strict=strict)
    events: list[MatchRecord | TransferRecord | ContentionRecord] = []
    ticks = 0
    try:
        observations = [record.to_observation() for record in read_records(input_path, ObservationRecord)]
        for result in run_pipeline(runner, observations):
            ticks += 1
            events.extend(
                ContentionRecord(t=result.t, cell=contention.cell, object_ids=list(contention.object_ids))
                for contention in result.encoding.contentions
            )
            events.extend(MatchRecord.from_event(event, layer=1) for event in result.layer1)
            events.extend(TransferRecord.from_input(item, result.t) for item in result.transfers)
            events.extend(MatchRecord.from_event(event, layer=2) for event in result.layer2)
    except TesseraError as e:
        raise _fail(e) from e

    output.write_text(dump_records(events))
    counts = {"match": 0, "transfer": 0, "contention": 0}
    for event in events:
        counts[event.kind] += 1
    _CONSOLE.print(
        _summary(
            "Pipeline summary",
            {
                "ticks": ticks,
                "layer-1 nodes": len(runner.layer1),
                "layer-2 nodes": len(runner.layer2),
                "matches": counts["match"],
                "transfers": counts["transfer"],
                "contentions": counts["contention"],
            },
        )
    )


@synth_subapp.command(
    name="sequences",
    help="Write labeled symbol sequences drawn from noisy patterns",
    short_help="Generate a sequence file",
)
def synth_sequences(
    output: _OUTPUT_ARG = Path("sequences.jsonl"),
    n: Annotated[int, typer.Option(min=0, help="Number of sequences")] = 230,
    noise_rate: Annotated[float, typer.Option(min=0, max=MAX_NOISE_RATE, help="Per-symbol noise probability")] = 0.1,
    seed: _SEED_ARG = 0,
    pattern: Annotated[
        list[str] | None,
        typer.Option(help="A pattern as hex digits; repeat for more. Defaults to eight well separated patterns"),
    ] = None,
    order: Annotated[PatternOrder, typer.Option(help="Order in which patterns are drawn")] = PatternOrder.random,
    warmup: Annotated[int, typer.Option(min=0, help="Leading sequences of the default patterns made extra noisy")] = 0,
) -> None:
    try:
        if pattern:
            items = gen_sequence_stream([parse_symbols(text) for text in pattern], n, noise_rate, seed, order=order)
        else:
            items = list(standard_sequence_fixture(seed, n=n, noise_rate=noise_rate, warmup=warmup).items)
    except (TesseraError, ValueError) as e:
        raise typer.BadParameter(str(e)) from e
    write_records(output, [SequenceRecord.from_labeled(item) for item in items])
    typer.echo(f"Wrote {len(items)} sequences to {output}")


@synth_subapp.command(
    name="points",
    help="Write observations of objects crossing a scene along four labeled paths",
    short_help="Generate an observation file",
)
def synth_points(
    output: _OUTPUT_ARG = Path("observations.jsonl"),
    n_objects: Annotated[int, typer.Option(min=1, help="Number of objects")] = 20,
    seed: _SEED_ARG = 0,
    noise_rate: Annotated[float, typer.Option(min=0, max=MAX_NOISE_RATE, help="Per-step box shift probability")] = 0.0,
    jitter: Annotated[float, typer.Option(min=0, help="Standard deviation of positional jitter")] = 0.0,
    spawn_interval: Annotated[
        int | None, typer.Option(min=1, help="Ticks between object entries; objects overlap when short")
    ] = None,
    config: _CONFIG_ARG = None,
) -> None:
    grid = _config(config, {}).grid.to_spec()
    patterns = crossing_patterns(grid, jitter_sigma=jitter, symbol_noise_rate=noise_rate)
    items = gen_point_stream(
        patterns, n_objects, seed, grid=grid, order=PatternOrder.round_robin, spawn_interval=spawn_interval
    )
    write_records(output, [ObservationRecord.from_labeled(item) for item in items])
    typer.echo(f"Wrote {len(items)} observations to {output}")


@app.command(
    name="eval-sweep",
    help="Mean clustering quality, model count and runtime for every epsilon over repeated standard fixtures",
    short_help="Sweep the merge threshold",
)
def eval_sweep(
    output: _OUTPUT_ARG = Path("sweep.csv"),
    eps: Annotated[list[float] | None, typer.Option(min=0, max=1, help="Epsilon value; repeat for more")] = None,
    repeats: Annotated[int, typer.Option(min=1, help="Fixtures per epsilon")] = DEFAULT_REPEATS,
    seed: _SEED_ARG = 0,
) -> None:
    rows = sweep_epsilon(eps or _DEFAULT_EPSILONS, repeats=repeats, seed=seed)
    with output.open("w", newline="") as file:
        writer = csv.writer(file)
        writer.writerow(["epsilon", "mean_ccr", "variance", "mean_models", "mean_seconds"])
        for row in rows:
            writer.writerow([row.epsilon, row.mean_ccr, row.variance, row.mean_models, row.mean_seconds])

    table = Table(title="Epsilon sweep")
    for column in ("epsilon", "mean CCR", "variance", "models", "seconds"):
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(
            f"{row.epsilon:g}",
            f"{row.mean_ccr:.3f}",
            f"{row.variance:.4f}",
            f"{row.mean_models:.1f}",
            f"{row.mean_seconds:.3f}",
        )
    _CONSOLE.print(table)


@app.command(
    name="eval-converge",
    help="Windowed clustering quality after every sequence of a standard fixture",
    short_help="Trace clustering quality over time",
)
def eval_converge(
    output: _OUTPUT_ARG = Path("convergence.csv"),
    n: Annotated[int, typer.Option(min=1, help="Number of sequences")] = 230,
    noise_rate: Annotated[float, typer.Option(min=0, max=MAX_NOISE_RATE, help="Per-symbol noise probability")] = 0.1,
    warmup: Annotated[int, typer.Option(min=0, help="Leading sequences made extra noisy")] = 0,
    window: Annotated[int, typer.Option(min=1, help="Sequences per quality window")] = DEFAULT_WINDOW,
    threshold: Annotated[float, typer.Option(min=0, max=1, help="Quality that counts as stable")] = 0.85,
    seed: _SEED_ARG = 0,
    config: _CONFIG_ARG = None,
    epsilon: _EPSILON_ARG = None,
) -> None:
    params = _config(config, {"epsilon": epsilon}).params
    fixture = standard_sequence_fixture(seed, n=n, noise_rate=noise_rate, warmup=warmup)
    curve = convergence_curve(fixture.items, params, window)
    with output.open("w", newline="") as file:
        writer = csv.writer(file)
        writer.writerow(["n_sequences", "ccr"])
        writer.writerows([point.n_sequences, point.ccr] for point in curve)
    stable_from = stabilization_point(curve, threshold)
    typer.echo(f"Wrote {len(curve)} points to {output}")
    typer.echo(f"Stable from sequence {stable_from}" if stable_from is not None else "Never stabilized")


@app.command(name="models", help="Print the models stored in a node snapshot", short_help="Show a snapshot")
def models(
    snapshot: Annotated[Path, typer.Argument(exists=True, dir_okay=False, help="Snapshot written by 'cluster'")],
) -> None:
    try:
        _CONSOLE.print(render_snapshot(load_snapshot(snapshot)))
    except SnapshotError as e:
        raise _fail(e) from e


@app.command(
    name="match",
    help="Find the snapshot model closest to a partial sequence and predict how the sequence continues",
    short_help="Match and predict a partial sequence",
)
def match(
    snapshot: Annotated[Path, typer.Argument(exists=True, dir_okay=False, help="Snapshot written by 'cluster'")],
    query: Annotated[str, typer.Argument(help="Symbols as hex digits, or space separated integers")],
) -> None:
    try:
        node = load_snapshot(snapshot).to_node()
        symbols = parse_symbols(query)
    except SnapshotError as e:
        raise _fail(e) from e
    except ValueError as e:
        raise typer.BadParameter(f"{query!r} is not a symbol sequence.") from e
    closest = node.match_closest(symbols)
    if closest is None:
        typer.echo("The snapshot holds no models")
        raise typer.Exit(code=1)
    index, distance = closest
    model = node.store[index - 1]
    typer.echo(f"model {index} (id {model.cluster_id}) at distance {distance:.3f}: {render_symbols(model.sequence)}")
    typer.echo(f"predicted continuation: {render_symbols(node.predict(symbols, index))}")


@app.command(name="decode", help="Split an upper-layer symbol into its node id and model index")
def decode(
    symbol: Annotated[int, typer.Argument(help="Symbol received by an upper-layer node")],
    m_u: Annotated[int, typer.Option(min=1, help="Store capacity of the sending layer")] = 64,
) -> None:
    try:
        node_id, model_index = decode_output(symbol, m_u)
    except TesseraError as e:
        raise _fail(e) from e
    typer.echo(f"node {node_id}, model {model_index}")


@app.callback()
def main(
    version: bool = typer.Option(None, "-V", "--version", callback=version_callback, is_eager=True),
    log_level: Annotated[LogLevel, typer.Option(help="Level of the tessera loggers")] = LogLevel.warning,
):
    logger = logging.getLogger("tessera")
    logger.setLevel(log_level.upper())
    if not logger.handlers:
        logger.addHandler(RichHandler(console=Console(stderr=True), show_path=False))


if __name__ == "__main__":
    app()

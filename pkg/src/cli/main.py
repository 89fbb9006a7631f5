import logging
from pathlib import Path
from typing import List, Optional

import pandas as pd
import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from src.cli import io, pipeline
from src.cli.pipeline import EXIT_OK, EXIT_USAGE, PipelineConfig
from src.config import settings
from src.simulation.experiments import EXPERIMENTS

app = typer.Typer(help="Shape anomaly detection for collections of time series.", no_args_is_help=True)
console = Console()
logger = logging.getLogger(__name__)


def setup_logging(level: Optional[str] = None) -> None:
    logging.basicConfig(
        level=(level or settings.LOG_LEVEL).upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=False)],
        force=True,
    )


def _config(config: Optional[Path], **overrides) -> PipelineConfig:
    try:
        return PipelineConfig.load(config, **overrides)
    except (ValueError, OSError) as exc:
        console.print(f"[red]invalid configuration:[/red] {exc}")
        raise typer.Exit(EXIT_USAGE)


def _show(frame, title: str, limit: int = 20) -> None:
    table = Table(title=title)
    for column in frame.columns:
        table.add_column(str(column))
    for row in frame.head(limit).itertuples(index=False):
        table.add_row(*(f"{v:.4g}" if isinstance(v, float) else str(v) for v in row))
    console.print(table)


@app.callback()
def main(log_level: Optional[str] = typer.Option(None, "--log-level", help="Overrides LOG_LEVEL.")):
    setup_logging(log_level)


@app.command()
def detect(
    input: Optional[Path] = typer.Option(None, "--input", "-i", help="Long-format CSV of series."),
    output: Optional[Path] = typer.Option(None, "--output", "-o"),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="YAML run configuration."),
    families: Optional[List[str]] = typer.Option(None, "--family", help="Preset name; repeatable."),
    alpha: Optional[float] = typer.Option(None),
    nmin: Optional[int] = typer.Option(None, "--nmin"),
    rho: Optional[float] = typer.Option(None),
    top_k: Optional[int] = typer.Option(None, "--top-k"),
    criterion: Optional[str] = typer.Option(None),
    seed: Optional[int] = typer.Option(None),
    workers: Optional[int] = typer.Option(None),
):
    """Fit the model space to a collection and rank its series by anomaly score."""
    cfg = _config(
        config,
        input=input,
        output=output,
        families=families or None,
        alpha=alpha,
        n_min=nmin,
        rho=rho,
        top_k=top_k,
        criterion=criterion,
        seed=seed,
        workers=workers,
    )
    code = pipeline.run_detect(cfg)
    if code == EXIT_OK:
        ranking = io.read_csv(Path(cfg.output) / "ranking.csv")
        _show(ranking, f"Most anomalous series (top {cfg.top_k})", cfg.top_k)
    raise typer.Exit(code)


@app.command()
def simulate(
    experiment: str = typer.Argument(..., help="Experiment id, E1 to E6."),
    output: Path = typer.Option(Path("data"), "--output", "-o"),
    seed: int = typer.Option(settings.DEFAULT_SEED),
    n_anomalies: int = typer.Option(10, "--anomalies", help="One of 1, 5 or 10."),
    n_series: Optional[int] = typer.Option(None, "--series"),
    n_hours: Optional[int] = typer.Option(None, "--hours"),
):
    """Write a labeled synthetic collection (data.csv, labels.csv)."""
    if experiment.upper() not in EXPERIMENTS:
        console.print(f"[red]unknown experiment {experiment!r}; expected one of {sorted(EXPERIMENTS)}[/red]")
        raise typer.Exit(EXIT_USAGE)
    code = pipeline.guarded(
        lambda: pipeline.simulate(experiment, seed, output, n_anomalies, n_series, n_hours),
        output,
    )
    if code == EXIT_OK:
        console.print(f"wrote {experiment.upper()} to {output}")
    raise typer.Exit(code)


@app.command()
def benchmark(
    input: Optional[Path] = typer.Option(None, "--input", "-i"),
    labels: Optional[Path] = typer.Option(None, "--labels", help="labels.csv matching the input."),
    experiment: Optional[str] = typer.Option(None, help="Regenerate this experiment instead."),
    replicates: int = typer.Option(3),
    n_series: Optional[int] = typer.Option(None, "--series"),
    output: Optional[Path] = typer.Option(None, "--output", "-o"),
    config: Optional[Path] = typer.Option(None, "--config", "-c"),
    top_k: Optional[int] = typer.Option(None, "--top-k"),
    criterion: Optional[str] = typer.Option(None),
    seed: Optional[int] = typer.Option(None),
    workers: Optional[int] = typer.Option(None),
):
    """Score detection against known labels: F, relative F and excess rank."""
    cfg = _config(
        config,
        input=input,
        output=output,
        top_k=top_k,
        criterion=criterion,
        seed=seed,
        workers=workers,
    )
    if experiment is None and (cfg.input is None or labels is None):
        console.print("[red]benchmark needs --input and --labels, or --experiment[/red]")
        raise typer.Exit(EXIT_USAGE)

    def action():
        if experiment is not None:
            _show(pipeline.experiment_benchmark(experiment, cfg, replicates, n_series=n_series), experiment)
        else:
            report = pipeline.benchmark(cfg, labels)
            _show(pd.DataFrame([report.as_dict()]), "Benchmark")

    raise typer.Exit(pipeline.guarded(action, cfg.output))


@app.command("score-one")
def score_one(
    space: Path = typer.Option(..., "--space", help="Directory written by detect (model_space/)."),
    input: Path = typer.Option(..., "--input", "-i"),
    series_id: Optional[str] = typer.Option(None, "--series-id"),
    config: Optional[Path] = typer.Option(None, "--config", "-c"),
    workers: Optional[int] = typer.Option(None),
):
    """Score one new series against a persisted model space."""
    cfg = _config(config, workers=workers)
    records = []
    code = pipeline.guarded(lambda: records.append(pipeline.score_one(space, input, cfg, series_id)), None)
    if code != EXIT_OK:
        raise typer.Exit(code)
    record = records[0]
    console.print(
        f"{record.series_id}: score={record.score:.6g} alt_score={record.alt_score:.6g} "
        f"best_family={record.best_family}"
    )
    raise typer.Exit(EXIT_OK)


@app.command()
def feedback(
    space: Path = typer.Option(..., "--space"),
    series_id: str = typer.Option(..., "--series-id"),
    label: str = typer.Option(..., "--label", help="FP moves the series to the null space, FN to the alternative."),
    output: Optional[Path] = typer.Option(None, "--output", "-o"),
):
    """Apply a false positive or false negative label and rebuild the space."""
    code = pipeline.guarded(lambda: pipeline.feedback(space, series_id, label, output), output or space)
    if code == EXIT_OK:
        console.print(f"applied {label.upper()} to {series_id}")
    raise typer.Exit(code)


if __name__ == "__main__":
    app()

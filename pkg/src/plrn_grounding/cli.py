import logging
import sys
from pathlib import Path
from typing import Annotated, List, Optional, Sequence

import click
import typer

from .config import ABLATIONS, LOG_LEVEL, load_config, parse_overrides
from .data import load_dataset
from .errors import PLRNError
from .evaluation import score_predictions
from .head import read_predictions
from .report import write_model_size, write_report
from .synthetic import (generate_synthetic, least_squares_probe, load_synthetic_config, pattern_direction,
                        planted_window, save_synthetic, window_contrast_search)
from .trainer import CHECKPOINT_FILE, predict, run_ablation, train
from .trainer import grad_check as run_grad_check
from .utils import parse_float_list, parse_int_list

# Setup logging
logging.basicConfig(
    level=getattr(logging, LOG_LEVEL, logging.INFO),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    stream=sys.stderr
)
logger = logging.getLogger(__name__)

app = typer.Typer(
    name="plrn",
    help="Temporal grounding of natural-language queries in untrimmed videos.",
    add_completion=False,
    no_args_is_help=True,
)

ConfigOption = Annotated[Optional[str], typer.Option("--config", help="Preset name (full, desk, tiny) or config file")]
SetOption = Annotated[Optional[List[str]], typer.Option("--set", help="Override a config key, as key=value")]


# ==================== Data ====================

@app.command("gen-data")
def gen_data(
    out: Annotated[Path, typer.Option(help="Dataset directory to write")],
    config: Annotated[Optional[Path], typer.Option(help="Synthetic generator config file")] = None,
    overrides: SetOption = None,
) -> None:
    """Generate a synthetic grounding dataset and log its identifiability probes."""
    cfg = load_synthetic_config(config, parse_overrides(overrides or []))
    dataset = generate_synthetic(cfg)
    save_synthetic(dataset, out)

    probe = least_squares_probe(dataset)
    first = dataset.samples[0]
    found = window_contrast_search(dataset.provider.load(first.video_id).frames, pattern_direction(dataset, first))
    logger.info(f"Window search on {first.sample_id}: found frames {found}, "
                f"planted {planted_window(dataset, first)}")
    typer.echo(f"{len(dataset.samples)} samples written to {out}")
    typer.echo(probe.table())


# ==================== Training ====================

@app.command("train")
def train_command(
    data: Annotated[Path, typer.Option(help="Dataset directory")],
    out: Annotated[Path, typer.Option(help="Run directory (per-variant subdirectories with --ablation)")],
    config: ConfigOption = None,
    overrides: SetOption = None,
    ablation: Annotated[bool, typer.Option(help="Train every ablation variant for every seed")] = False,
    seeds: Annotated[str, typer.Option(help="Comma-separated seeds for --ablation")] = "1,2,3",
    variants: Annotated[Optional[str], typer.Option(help=f"Comma-separated subset of {','.join(ABLATIONS)}")] = None,
) -> None:
    """Train the grounding network, keeping the checkpoint with the best validation mIoU."""
    cfg = load_config(config, parse_overrides(overrides or []))
    dataset = load_dataset(data)
    if ablation:
        chosen = [v.strip() for v in variants.split(",")] if variants else None
        results = run_ablation(cfg, dataset, out, chosen, parse_int_list(seeds))
        for variant, scores in results.items():
            typer.echo(f"{variant}: best validation mIoU {', '.join(f'{s:.2f}' for s in scores)}")
        return
    result = train(cfg, dataset, out)
    typer.echo(f"best validation mIoU {result.best_miou:.2f} at epoch {result.best_epoch}; "
               f"checkpoint written to {Path(out) / CHECKPOINT_FILE}")


@app.command("predict")
def predict_command(
    checkpoint: Annotated[Path, typer.Option(help="Checkpoint file (.plrn)")],
    data: Annotated[Path, typer.Option(help="Dataset directory")],
    out: Annotated[Path, typer.Option(help="Prediction CSV to write")],
    config: ConfigOption = None,
    overrides: SetOption = None,
    split: Annotated[Optional[str], typer.Option(help="Predict one manifest split (train, val, test)")] = None,
    dump_attention: Annotated[Optional[Path], typer.Option(help="Directory for attention CSV dumps")] = None,
) -> None:
    """Predict boundaries for a dataset with a trained checkpoint."""
    cfg = load_config(config, parse_overrides(overrides or [])) if config or overrides else None
    dataset = load_dataset(data)
    samples = dataset.subset(split) if split else dataset.samples
    rows = predict(checkpoint, samples, dataset.provider, dataset.vocab, out, cfg, dump_attention)
    typer.echo(f"{len(rows)} predictions written to {out}")


# ==================== Evaluation ====================

@app.command("evaluate")
def evaluate_command(
    pred: Annotated[Path, typer.Option(help="Prediction CSV")],
    data: Annotated[Path, typer.Option(help="Dataset directory")],
    thresholds: Annotated[str, typer.Option(help="Comma-separated tIoU thresholds")] = "0.3,0.5,0.7",
    split: Annotated[Optional[str], typer.Option(help="Evaluate one manifest split")] = None,
    out: Annotated[Optional[Path], typer.Option(help="Write the metrics CSV here instead of stdout")] = None,
) -> None:
    """Score a prediction file with R@tIoU and mIoU."""
    dataset = load_dataset(data)
    samples = dataset.subset(split) if split else dataset.samples
    report = score_predictions(read_predictions(pred), samples, parse_float_list(thresholds))
    typer.echo(report.table())
    if out is not None:
        report.save(out)
        logger.info(f"Metrics written to {out}")
    else:
        typer.echo(report.to_csv(), nl=False)


@app.command("grad-check")
def grad_check_command(
    config: ConfigOption = "tiny",
    overrides: SetOption = None,
    tolerance: Annotated[float, typer.Option(help="Maximum relative error")] = 1e-4,
) -> None:
    """Compare analytic and finite-difference gradients of every parameter on a random sample."""
    cfg = load_config(config, parse_overrides(overrides or []))
    report = run_grad_check(cfg, tolerance)
    status = "passed" if report.passed else "FAILED"
    typer.echo(f"max relative error {report.max_relative_error:.3e} ({report.worst_parameter}) over "
               f"{report.checked_entries} entries: {status}")
    if not report.passed:
        logger.error(f"Gradient check failed at tolerance {tolerance:g}")
        raise typer.Exit(code=1)


@app.command("report")
def report_command(
    out: Annotated[Path, typer.Option(help="Directory for the CSV tables")],
    logs: Annotated[Optional[List[Path]], typer.Option(help="Run directories (searched recursively)")] = None,
    config: ConfigOption = None,
    overrides: SetOption = None,
    vocab_size: Annotated[int, typer.Option(help="Vocabulary size for the model-size table")] = 11125,
    d_raw: Annotated[int, typer.Option(help="Raw feature width for the model-size table")] = 4096,
) -> None:
    """Write ablation.csv and loss_curves.csv from run logs, or model_size.csv for a config."""
    if not logs and config is None:
        raise click.UsageError("report needs --logs and/or --config")
    if logs:
        table = write_report(logs, out)
        for variant, metrics in table.items():
            typer.echo(f"{variant}: " + ", ".join(f"{k}={v:.2f}" for k, v in metrics.items()))
    if config is not None:
        cfg = load_config(config, parse_overrides(overrides or []))
        typer.echo(f"model size table written to {write_model_size(cfg, vocab_size, d_raw, out)}")


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and map failures to exit codes: 1 for invalid input or usage, 2 for I/O."""
    command = typer.main.get_command(app)
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        result = command.main(args=args, prog_name="plrn", standalone_mode=False)
    except click.exceptions.UsageError as e:
        e.show()
        return 1
    except click.exceptions.Abort:
        logger.error("Aborted")
        return 1
    except PLRNError as e:
        logger.error(f"Error: {e}")
        return 1
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return 2
    return result if isinstance(result, int) else 0

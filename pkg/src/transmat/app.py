import typer
from typing import Optional

from transmat.commands.evaluate import evaluate_command
from transmat.commands.gradcheck import gradcheck_command
from transmat.commands.infer import infer_command
from transmat.commands.params import params_command
from transmat.commands.synthetic import make_synthetic_command
from transmat.commands.train import train_command
from transmat.core.concurrency import set_default_workers
from transmat.core.logger import set_verbosity
from transmat.core.output_prefs import set_output_preferences
from transmat.core.version import read_local_version

app = typer.Typer(help="Trimap-guided matting of transparent objects: train, evaluate, infer.")

app.command("train", help="Train a matting network.")(train_command)
app.command("eval", help="Evaluate a checkpoint with SAD/MSE/Grad/Conn.")(evaluate_command)
app.command("infer", help="Predict the alpha matte of one image.")(infer_command)
app.command("gradcheck", help="Check analytic gradients against finite differences.")(gradcheck_command)
app.command("make-synthetic", help="Write a tiny seeded synthetic dataset.")(make_synthetic_command)
app.command("params", help="Parameter counts of the ablation presets.")(params_command)


@app.callback(invoke_without_command=True)
def main(
    ctx: typer.Context,
    quiet: bool = typer.Option(False, "--quiet", help="Silence non-error output."),
    verbose: bool = typer.Option(False, "--verbose", help="Show verbose logs (per-iteration batches, tiles, checkpoints)."),
    version: bool = typer.Option(False, "--version", help="Show version."),
    workers: int = typer.Option(1, "--workers", help="Worker threads for data loading and per-sample evaluation."),
    columns: Optional[str] = typer.Option(
        None,
        "--columns",
        help="Comma-separated columns for table/csv output (global output option). Example: --columns sample_id,sad",
    ),
    precision: int = typer.Option(5, "--precision", help="Significant digits of floats in tables."),
):
    if version:
        print(f"transmat {read_local_version()}")
        raise typer.Exit(0)

    set_verbosity(quiet=quiet, verbose=verbose)
    set_default_workers(workers)
    set_output_preferences(columns=columns, precision=precision)

    if ctx.resilient_parsing:
        return
    if ctx.invoked_subcommand is None:
        typer.echo(ctx.get_help())


if __name__ == "__main__":
    app()

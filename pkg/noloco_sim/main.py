"""CLI entry point for the NoLoCo simulator."""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
from rich.progress import BarColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from .config import ExperimentConfig, OuterMethod, load_config
from .console import METHOD_STYLES, make_console, setup_logging
from .errors import NolocoError, exit_code_for
from .harness.io import dumps_json, write_json

logger = logging.getLogger(__name__)

WORLD_SIZES = [2**k for k in range(1, 11)]


class NolocoGroup(click.Group):
  """Command group that turns simulator errors into exit codes."""

  def invoke(self, ctx: click.Context) -> Any:
    try:
      return super().invoke(ctx)
    except (NolocoError, OSError) as e:
      make_console(stderr=True).print(f"[error]Error:[/error] {e}")
      ctx.exit(exit_code_for(e))


def _split_list(ctx, param, value: Optional[str]) -> Optional[List[str]]:
  if value is None:
    return None
  items = [item.strip() for item in value.split(",") if item.strip()]
  if not items:
    raise click.BadParameter("expected a comma-separated list")
  return items


def common_options(f):
  """--config/--seed/--out/--quiet/--verbose, accepted before or after the subcommand."""
  f = click.option("--verbose", "-v", is_flag=True, default=None, help="Debug logging")(f)
  f = click.option("--quiet", "-q", is_flag=True, default=None, help="Only warnings and data")(f)
  f = click.option("--out", "-o", type=click.Path(path_type=Path), help="Output path")(f)
  f = click.option("--seed", type=int, help="Override the config seed")(f)
  f = click.option(
    "--config",
    "-c",
    type=click.Path(exists=False, path_type=Path),
    help="Path to a JSON or YAML config file",
  )(f)
  return f


def _settings(ctx: click.Context, **local) -> Dict[str, Any]:
  """Group options overridden by any given on the subcommand."""
  merged = dict(ctx.obj or {})
  for key, value in local.items():
    if key in ("quiet", "verbose"):
      merged[key] = bool(merged.get(key)) or bool(value)
    elif value is not None:
      merged[key] = value
  setup_logging(verbose=bool(merged.get("verbose")), quiet=bool(merged.get("quiet")))
  return merged


def _load(settings: Dict[str, Any]) -> ExperimentConfig:
  config = load_config(settings.get("config"))
  if settings.get("seed") is not None:
    config = replace(config, seed=settings["seed"])
  return config


def _emit(settings: Dict[str, Any], data: Any) -> None:
  """Write JSON to --out when given, else to stdout."""
  out = settings.get("out")
  if out is not None:
    write_json(out, data)
    make_console(stderr=True, quiet=bool(settings.get("quiet"))).print(
      f"[success]✓[/success] wrote [info]{out}[/info]"
    )
  else:
    click.echo(dumps_json(data), nl=False)


@click.group(cls=NolocoGroup)
@common_options
@click.pass_context
def main(ctx, config, seed, out, quiet, verbose):
  """NoLoCo simulator - low-communication decentralized training at desk scale.

  Trains replicated pipelines with gossip or all-reduce outer optimizers,
  evaluates the analytic moment recursions and models communication time.
  """
  ctx.ensure_object(dict)
  ctx.obj.update({
    "config": config,
    "seed": seed,
    "out": out,
    "quiet": quiet,
    "verbose": verbose,
  })


@main.command()
@common_options
@click.option(
  "--method",
  type=click.Choice([m.value for m in OuterMethod]),
  help="Override the outer method",
)
@click.option("--steps", type=int, help="Override the number of inner steps")
@click.pass_context
def train(ctx, method, steps, **options):
  """Run one training experiment and write its metrics."""
  from .config import validate_config
  from .harness.trainer import Trainer, write_metrics

  settings = _settings(ctx, **options)
  config = _load(settings)
  if method is not None:
    config = replace(config, outer=replace(config.outer, method=OuterMethod(method)))
  if steps is not None:
    config = replace(config, steps=steps)
  validate_config(config)

  console = make_console(stderr=True, quiet=bool(settings.get("quiet")))
  trainer = Trainer(config)
  with Progress(
    TextColumn("[primary]{task.description}"),
    BarColumn(),
    TextColumn("{task.completed}/{task.total}"),
    TimeElapsedColumn(),
    console=console,
    transient=True,
  ) as progress:
    task = progress.add_task(f"train {trainer.outer.method.value}", total=config.steps)
    result = trainer.run(lambda done: progress.update(task, completed=done))

  target = settings.get("out") or config.output
  if target is not None:
    write_metrics(result, Path(target))
    console.print(f"[success]✓[/success] metrics written to [info]{target}[/info]")

  if result.records:
    final = result.records[-1]
    table = Table(title="Final metrics", border_style="muted")
    table.add_column("step", justify="right")
    table.add_column("outer step", justify="right")
    table.add_column("val loss", justify="right")
    table.add_column("replica std", justify="right")
    table.add_row(
      str(final.step),
      str(final.outer_step),
      f"{final.val_loss:.6g}",
      ", ".join(f"{s:.4g}" for s in final.replica_std) or "-",
    )
    console.print(table)


@main.command()
@common_options
@click.option(
  "--forcing",
  type=click.Choice(["summed", "exact"]),
  default="summed",
  show_default=True,
  help="Constant term of the outer-gradient variance",
)
@click.option("--horizon", type=int, help="Number of outer steps (default: steps / outer_interval)")
@click.pass_context
def analyze(ctx, forcing, horizon, **options):
  """Evaluate the analytic moment recursions for a quadratic NoLoCo config."""
  from .analytic.predict import predict
  from .analytic.recursions import Forcing
  from .harness.trainer import analytic_config_for

  settings = _settings(ctx, **options)
  config = _load(settings)
  cfg = analytic_config_for(config, horizon=horizon)
  cfg.forcing = Forcing(forcing)
  prediction = predict(cfg)

  console = make_console(stderr=True, quiet=bool(settings.get("quiet")))
  status = "[success]converges[/success]" if prediction.converges else "[error]diverges[/error]"
  lo, hi = prediction.gamma_interval
  console.print(
    f"{status}  |d_V| = {abs(prediction.d_v):.4f}  gamma = {cfg.gamma:.4f} in ({lo:.4f}, {hi:.4f})"
  )
  if prediction.asymptote is not None:
    console.print(f"variance asymptote ({cfg.forcing.value}): [info]{prediction.asymptote:.6g}[/info]")
  _emit(settings, prediction.to_dict())


@main.command()
@common_options
@click.option(
  "--mode",
  type=click.Choice(["wallclock", "reduce"]),
  default="wallclock",
  show_default=True,
  help="Blocking-overhead simulation or tree/pairwise reduce ratio",
)
@click.option("--world", type=int, default=1024, show_default=True, help="Number of workers")
@click.option("--inner-steps", type=int, default=100, show_default=True, help="Inner steps per outer step")
@click.option("--outer-steps", type=int, default=500, show_default=True, help="Outer steps")
@click.option("--mu", type=float, default=1.0, show_default=True, help="Log-latency mean")
@click.option("--sigma2", type=float, default=0.5, show_default=True, help="Log-latency variance")
@click.option("--include-transfer", is_flag=True, help="Add message transfer time at every sync")
@click.option(
  "--sigma2-grid",
  callback=_split_list,
  default="0,0.25,0.5,1.0",
  show_default=True,
  help="Comma-separated sigma2 values for --mode reduce",
)
@click.option("--trials", type=int, default=2000, show_default=True, help="Samples per reduce-ratio point")
@click.pass_context
def latency(ctx, mode, world, inner_steps, outer_steps, mu, sigma2, include_transfer, sigma2_grid, trials, **options):
  """Model communication time of tree all-reduce versus pairwise averaging."""
  from .latency.models import FleetSpec, LatencyModel
  from .latency.reduce import mc_reduce_ratio
  from .latency.wallclock import compare_wallclock
  from .numerics.rng import RngStream, Stream

  settings = _settings(ctx, **options)
  seed = settings.get("seed") if settings.get("seed") is not None else _load(settings).seed
  rng = RngStream(seed).spawn(Stream.LATENCY)
  console = make_console(stderr=True, quiet=bool(settings.get("quiet")))

  if mode == "wallclock":
    fleet = FleetSpec(
      world_size=world,
      inner_steps=inner_steps,
      outer_steps=outer_steps,
      step_latency=LatencyModel(mu, sigma2),
      include_transfer=include_transfer,
    )
    comparison = compare_wallclock(fleet, rng)
    console.print(
      f"DiLoCo / NoLoCo total time on {world} workers: [primary]{comparison.ratio:.4f}[/primary]"
    )
    _emit(settings, comparison.to_dict())
    return

  rows = []
  table = Table(title="Tree all-reduce / pairwise averaging", border_style="muted")
  table.add_column("world", justify="right")
  for value in sigma2_grid:
    table.add_column(f"σ²={value}", justify="right")
  for n in WORLD_SIZES:
    cells = [str(n)]
    for value in sigma2_grid:
      point = mc_reduce_ratio(n, LatencyModel(mu, float(value)), trials, rng.spawn(n))
      rows.append(point.to_dict())
      cells.append(f"{point.ratio:.3f}")
    table.add_row(*cells)
  console.print(table)
  _emit(settings, rows)


@main.command()
@common_options
@click.pass_context
def compare(ctx, **options):
  """Train sync-dp, DiLoCo and NoLoCo on identical data and report the differences."""
  from .harness.report import run_comparison

  settings = _settings(ctx, **options)
  config = _load(settings)
  console = make_console(stderr=True, quiet=bool(settings.get("quiet")))

  report = run_comparison(config, on_method=lambda name: console.print(f"[muted]training {name}...[/muted]"))

  table = Table(title="Final validation loss", border_style="muted")
  table.add_column("method")
  table.add_column("val loss", justify="right")
  for name, curve in report.val_curves.items():
    style = METHOD_STYLES.get(name, "info")
    table.add_row(f"[{style}]{name}[/{style}]", f"{curve[-1]:.6g}" if curve else "-")
  console.print(table)
  if report.std_lr_pearson is not None:
    console.print(f"Pearson(replica std, lr) = [info]{report.std_lr_pearson:.3f}[/info]")
  _emit(settings, report.to_dict())


@main.command()
@common_options
@click.option(
  "--param",
  type=click.Choice(["batch_size", "routing"]),
  required=True,
  help="What to sweep",
)
@click.option("--values", callback=_split_list, help="Comma-separated batch sizes")
@click.option("--seeds", callback=_split_list, default="0,1,2,3,4,5,6,7,8,9", show_default=True,
              help="Comma-separated seeds for the routing sweep")
@click.pass_context
def sweep(ctx, param, values, seeds, **options):
  """Batch-size sensitivity or the routing ablation."""
  from .harness.sweep import batch_size_sweep, median_by_value, routing_sweep

  settings = _settings(ctx, **options)
  config = _load(settings)
  console = make_console(stderr=True, quiet=bool(settings.get("quiet")))

  if param == "batch_size":
    if not values:
      raise click.UsageError("--values is required for the batch_size sweep")
    try:
      sizes = [int(v) for v in values]
    except ValueError as e:
      raise click.BadParameter(str(e), param_hint="--values") from e
    rows = batch_size_sweep(config, sizes)
    table = Table(title="Final validation loss by batch size", border_style="muted")
    table.add_column("batch size", justify="right")
    table.add_column("method")
    table.add_column("val loss", justify="right")
    for row in rows:
      table.add_row(str(row.value), row.method, f"{row.final_val_loss:.6g}")
    console.print(table)
    _emit(settings, [row.to_dict() for row in rows])
    return

  try:
    seed_values = [int(s) for s in seeds]
  except ValueError as e:
    raise click.BadParameter(str(e), param_hint="--seeds") from e
  rows = routing_sweep(config, seed_values)
  medians = median_by_value(rows)
  for mode, median in medians.items():
    console.print(f"{mode}: median final replica std [info]{median:.6g}[/info]")
  _emit(settings, {"rows": [row.to_dict() for row in rows], "median_replica_std": medians})


@main.command()
def version():
  """Show version information."""
  from . import __version__
  click.echo(f"noloco-sim v{__version__}")


if __name__ == "__main__":
  main()

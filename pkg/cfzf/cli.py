"""
Command-Line Interface for the Cell-Free ZF Simulator

Provides the ``run``, ``validate`` and ``summarize`` commands and a small
display layer that falls back to plain printing when rich is unavailable.
"""

import json
import logging
import sys
from typing import Any, Dict, List, Optional

import click

try:
    from rich.console import Console
    from rich.logging import RichHandler
    from rich.panel import Panel
    from rich.progress import Progress
    from rich.table import Table
    RICH_AVAILABLE = True
except ImportError:
    RICH_AVAILABLE = False

from . import __version__
from .combining import CombinerError
from .config import ConfigError
from .lsfd import LSFDError
from .closedform import FixedPointError
from .report import SummaryError, summarize
from .runner import ExperimentRunner, ValidationFailure


DOMAIN_ERRORS = (ConfigError, CombinerError, LSFDError, FixedPointError, SummaryError)


class CLIDisplay:
    """Handles CLI display with fallback for when rich is not available."""

    def __init__(self):
        self.use_rich = RICH_AVAILABLE
        if self.use_rich:
            self.console = Console(stderr=True)

    def print_header(self, title: str):
        """Print a header."""
        if self.use_rich:
            self.console.print(Panel(title, title="cfzf"))
        else:
            print(f"\n{'=' * 60}", file=sys.stderr)
            print(f"  {title}", file=sys.stderr)
            print(f"{'=' * 60}", file=sys.stderr)

    def print_table(self, headers: List[str], rows: List[List[str]], title: str = ""):
        """Print a table."""
        if self.use_rich:
            table = Table(title=title)
            for header in headers:
                table.add_column(header)
            for row in rows:
                table.add_row(*[str(cell) for cell in row])
            self.console.print(table)
            return

        if title:
            print(f"\n{title}:", file=sys.stderr)
        widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h))
                  for i, h in enumerate(headers)]
        header_row = " | ".join(str(h).ljust(widths[i]) for i, h in enumerate(headers))
        print(header_row, file=sys.stderr)
        print("-" * len(header_row), file=sys.stderr)
        for row in rows:
            print(" | ".join(str(c).ljust(widths[i]) for i, c in enumerate(row)), file=sys.stderr)

    def print_error(self, message: str):
        """Print error message."""
        if self.use_rich:
            self.console.print(Panel(message, title="Error", border_style="red"))
        else:
            print(f"Error: {message}", file=sys.stderr)

    def print_success(self, message: str):
        """Print success message."""
        if self.use_rich:
            self.console.print(f"[green]✓ {message}[/green]")
        else:
            print(f"✓ {message}", file=sys.stderr)

    def progress(self, description: str):
        """Context manager yielding an (finished, total) callback."""
        return _ProgressCallback(self, description)


class _ProgressCallback:
    def __init__(self, display: CLIDisplay, description: str):
        self.display = display
        self.description = description
        self._progress = None
        self._task = None

    def __enter__(self):
        if self.display.use_rich:
            self._progress = Progress(console=self.display.console, transient=True)
            self._progress.__enter__()
        return self

    def __call__(self, finished: int, total: int):
        if self._progress is None:
            return
        if self._task is None:
            self._task = self._progress.add_task(self.description, total=total)
        self._progress.update(self._task, completed=finished)

    def __exit__(self, *exc):
        if self._progress is not None:
            self._progress.__exit__(*exc)
        return False


def setup_logging(verbose: int):
    """WARNING by default, INFO with -v, DEBUG with -vv."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    handlers = [RichHandler(rich_tracebacks=True, show_path=False)] if RICH_AVAILABLE else None
    logging.basicConfig(level=level, format="%(message)s" if RICH_AVAILABLE else
                        "%(asctime)s %(name)s %(levelname)s %(message)s",
                        handlers=handlers, force=True)


def emit_error(kind: str, message: str, **details: Any):
    """Machine-readable error object on stderr."""
    payload: Dict[str, Any] = {'error': kind, 'message': message}
    payload.update(details)
    click.echo(json.dumps(payload), err=True)


def _fail(display: CLIDisplay, error: Exception, **details: Any):
    display.print_error(str(error))
    emit_error(type(error).__name__, str(error), **details)
    sys.exit(1)


def _show_run_summary(display: CLIDisplay, summary: Dict[str, Any]):
    rows = [[name, f"{value:.4f}"] for name, value in sorted(summary['mean_se'].items())]
    display.print_table(["Scheme (method)", "Average SE [bit/s/Hz]"], rows,
                        title=f"{summary['rows']} rows, {summary['points']} point(s) x "
                              f"{summary['drops']} drops in {summary['elapsed_s']:.1f} s")


@click.group()
@click.version_option(__version__, prog_name="cfzf")
@click.option('--verbose', '-v', count=True, help='-v for progress logs, -vv for debug logs')
@click.pass_context
def main(ctx, verbose: int):
    """
    Cell-free massive MIMO uplink simulator with zero-forcing combining and LSFD.

    Example:
        cfzf run experiment_specs/scheme_comparison.json --workers 4
    """
    setup_logging(verbose)
    ctx.obj = CLIDisplay()


@main.command()
@click.argument('spec_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--output', '-o', type=click.Path(dir_okay=False), help='Result CSV (defaults to the experiment output_path)')
@click.option('--workers', '-w', type=click.IntRange(min=1), default=1, envvar='CFZF_WORKERS',
              show_default=True, help='Worker processes for Monte-Carlo trials')
@click.pass_obj
def run(display: CLIDisplay, spec_path: str, output: Optional[str], workers: int):
    """Run an experiment and write one row per drop, UE, scheme and method."""
    runner = ExperimentRunner(workers=workers)
    try:
        runner.load_spec(spec_path)
        display.print_header(f"Running {spec_path}")
        with display.progress("Drops") as progress:
            runner.run(progress=progress)
        saved = runner.save_outputs(output)
    except DOMAIN_ERRORS as e:
        _fail(display, e)

    _show_run_summary(display, runner.get_run_summary())
    display.print_success(f"Results saved to {saved['rows']}")


@main.command()
@click.argument('spec_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--output', '-o', type=click.Path(dir_okay=False), help='Result CSV (defaults to the experiment output_path)')
@click.option('--tolerance', '-t', type=float, default=None,
              help='Relative SE tolerance for the exact closed forms (spec default otherwise)')
@click.option('--workers', '-w', type=click.IntRange(min=1), default=1, envvar='CFZF_WORKERS',
              show_default=True, help='Worker processes for Monte-Carlo trials')
@click.pass_obj
def validate(display: CLIDisplay, spec_path: str, output: Optional[str], tolerance: Optional[float],
             workers: int):
    """Compare closed-form and Monte-Carlo SE per UE; exit 1 beyond tolerance."""
    runner = ExperimentRunner(workers=workers)
    try:
        runner.load_spec(spec_path)
        display.print_header(f"Validating {spec_path}")
        with display.progress("Drops") as progress:
            table = runner.validate(tolerance=tolerance, progress=progress)
    except ValidationFailure as e:
        saved = runner.save_outputs(output)
        _fail(display, e, max_deviation=e.max_deviation, scheme=e.scheme,
              validation_table=saved.get('validation'))
    except (DOMAIN_ERRORS + (ValueError,)) as e:
        _fail(display, e)

    saved = runner.save_outputs(output)
    rows = [[scheme, f"{group['deviation'].mean():.4%}", f"{group['deviation'].max():.4%}"]
            for scheme, group in table.groupby('scheme')]
    display.print_table(["Scheme", "Mean deviation", "Max deviation"], rows, title="Closed form vs Monte Carlo")
    display.print_success(f"Validation passed; table saved to {saved['validation']}")


@main.command(name='summarize')
@click.argument('csv_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--output', '-o', type=click.Path(dir_okay=False), help='Summary CSV (CDF samples go next to it)')
@click.pass_obj
def summarize_command(display: CLIDisplay, csv_path: str, output: Optional[str]):
    """Average SE, 95%-likely SE and CDF samples per scheme."""
    try:
        summary, _ = summarize(csv_path, output)
    except SummaryError as e:
        _fail(display, e, lines=e.lines)

    keys = [c for c in summary.columns if c not in ('n', 'mean_se', 'p5_se')]
    rows = [[*(str(r[k]) for k in keys), str(r['n']), f"{r['mean_se']:.4f}", f"{r['p5_se']:.4f}"]
            for _, r in summary.iterrows()]
    display.print_table([*keys, "n", "Average SE", "95%-likely SE"], rows, title=csv_path)
    if output is None:
        click.echo(summary.to_csv(index=False, float_format='%.17g'), nl=False)
    else:
        display.print_success(f"Summary saved to {output}")


if __name__ == '__main__':
    main()

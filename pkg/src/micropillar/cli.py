"""Command-line front end: ``micropillar scan|evaluate|ingest|figure|validate``."""

from __future__ import annotations

import sys

import click
import numpy as np

from . import designer
from .channels import ChannelFileError, ingest_channels
from .geometry import load_config, parse_range


def _range(text: str | None):
    if text is None:
        return None
    try:
        return tuple(parse_range(text))
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc


def _config(ctx_opts: dict, config_file: str | None) -> designer.ScanConfig:
    data = {}
    if config_file:
        try:
            data = load_config(config_file)
        except (OSError, ValueError) as exc:
            raise click.UsageError(f"config: {exc}") from exc
    mapping = {
        "lambda_um": ctx_opts.get("lambda_um"),
        "m_range": _range(ctx_opts.get("m_range")),
        "n_top": _range(ctx_opts.get("n_top")),
        "n_bottom": _range(ctx_opts.get("n_bottom")),
        "background": ctx_opts.get("background"),
        "f_peak": ctx_opts.get("f_peak"),
        "temperature_k": ctx_opts.get("temperature_k"),
        "rank": ctx_opts.get("rank"),
        "channels_path": ctx_opts.get("channels"),
    }
    data.update({k: v for k, v in mapping.items() if v is not None})
    try:
        return designer.ScanConfig.from_mapping(data)
    except (TypeError, ValueError) as exc:
        raise click.UsageError(f"config: {exc}") from exc


def design_options(f):
    opts = [
        click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), help="key = value config file"),
        click.option("--lambda-um", type=float, help="design wavelength (um)"),
        click.option("--m-range", help="full-wave diameter multiples, e.g. 5:8"),
        click.option("--n-top", help="top pair counts, e.g. 9,11,13"),
        click.option("--n-bottom", help="bottom pair counts, e.g. 35.5"),
        click.option("--background", type=click.Choice(["air", "bcb"])),
        click.option("--f-peak", type=float, help="on-resonance Purcell calibration"),
        click.option("--temperature-k", type=float),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def output_options(f):
    f = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)(f)
    f = click.option("--out", type=click.Path(dir_okay=False), help="write here instead of stdout")(f)
    return f


def _emit(text: str, out: str | None) -> None:
    if out:
        try:
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise click.ClickException(f"cannot write {out}: {exc}") from exc
    else:
        click.echo(text, nl=False)


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Micropillar single-photon source design tools."""


@main.command("scan")
@design_options
@output_options
@click.option("--rank", type=click.Choice(list(designer.RANKINGS)))
@click.option("--channels", type=click.Path(exists=True, dir_okay=False), help="use ingested channel spectra")
def scan_cmd(config_file, out, fmt, **opts):
    """Evaluate every design in the configured ranges and rank them."""
    cfg = _config(opts, config_file)
    try:
        rows = designer.scan(cfg)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    _emit(designer.report(rows, fmt=fmt, config=cfg), out)
    failed = sum(not r.ok for r in rows)
    if failed:
        click.echo(f"{failed} of {len(rows)} designs failed (see status column)", err=True)


@main.command("evaluate")
@design_options
@output_options
@click.option("--d-cavity", type=float, help="explicit diameter (um); overrides --m-range")
def evaluate_cmd(config_file, out, fmt, d_cavity, **opts):
    """Run the full pipeline on a single design."""
    cfg = _config(opts, config_file)
    designs = cfg.designs()
    if d_cavity is None and len(designs) != 1:
        raise click.UsageError("evaluate takes exactly one design; narrow the ranges")
    m, design = designs[0]
    if d_cavity is not None:
        if len({(d.n_top, d.n_bottom) for _, d in designs}) != 1:
            raise click.UsageError("evaluate takes exactly one design; narrow the ranges")
        try:
            design = design.with_(d_cavity=d_cavity)
        except ValueError as exc:
            raise click.UsageError(str(exc)) from exc
        m = None
    row = designer.evaluate_design(design, cfg, m)
    _emit(designer.report([row], fmt=fmt, config=cfg), out)


@main.command("ingest")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@design_options
@output_options
def ingest_cmd(path, config_file, out, fmt, **opts):
    """Validate a channel CSV and report its figures of merit."""
    try:
        ingest_channels(path)
    except ChannelFileError as exc:
        raise click.UsageError(f"{path}: {exc}") from exc
    opts["channels"] = path
    cfg = _config(opts, config_file)
    try:
        rows = designer.scan(cfg)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    _emit(designer.report(rows, fmt=fmt, config=cfg), out)


@main.command("figure")
@click.argument("figure_id", type=click.Choice(list(designer.FIGURE_IDS)))
@design_options
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def figure_cmd(figure_id, config_file, out, **opts):
    """Write plot-ready data for one figure."""
    cfg = _config(opts, config_file)
    cols, rows = designer.figure_data(figure_id, cfg, path=out)
    click.echo(f"{figure_id}: {len(rows)} rows x {len(cols)} columns -> {out}", err=True)


@main.command("validate")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
def validate_cmd(path):
    """Check identities on a channel CSV or a scan report; exit 1 on any violation."""
    with open(path, encoding="utf-8") as fh:
        head = fh.read(4096)
    problems: list[str] = []
    if head.lstrip().startswith("{") or "epsilon_times_I" in head:
        try:
            rows = designer.read_report(path)
        except (ValueError, KeyError, TypeError) as exc:
            raise click.UsageError(f"{path}: {exc}") from exc
        for r in rows:
            problems += [f"{r.label}: {p}" for p in r.check()]
        checked = f"{len(rows)} report rows"
    else:
        try:
            ch = ingest_channels(path)
        except ChannelFileError as exc:
            raise click.UsageError(f"{path}: {exc}") from exc
        with np.errstate(invalid="ignore"):
            direct = ch.gamma_top / ch.gamma_total
            product = ch.beta * ch.eta
        ok = ~np.isnan(product)
        dev = np.abs(direct[ok] - product[ok])
        if dev.size and dev.max() > 1e-12:
            problems.append(f"beta*eta differs from top/total by {dev.max():.3g}")
        if np.any(np.abs(ch.purcell * ch.xi - ch.gamma_top)[ok] > 1e-12 * np.maximum(1.0, ch.gamma_top[ok])):
            problems.append("F_P * xi differs from gamma_top")
        checked = f"{ch.wavelength.size} channel rows"
    for p in problems:
        click.echo(f"FAIL {p}")
    click.echo(f"{checked}: {'ok' if not problems else f'{len(problems)} violations'}")
    sys.exit(1 if problems else 0)


if __name__ == "__main__":
    main()

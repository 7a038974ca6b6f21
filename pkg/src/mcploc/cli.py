"""Command-line front end.

Subcommands: localize (single changepoint), multi (K changepoints),
null-table (build/cache the simulated null), bench (experiment harness),
np-oracle (score-optimality Monte Carlo). Every command echoes its seed,
writes files atomically, prints floats with 17 significant digits, and is
byte-reproducible for a fixed seed regardless of worker count.

Exit codes: 0 success, 2 validation error, 3 compute error.
"""

import csv
import functools
import json
import os
import sys

import click
import numpy as np

from . import testing
from .bench import load_config, make_score_family, np_power_oracle, run_experiment
from .combine import localize as _localize
from .combine import result_dict
from .core import Dataset, RandomStream
from .errors import (
    ConfigurationError,
    DegenerateDataError,
    IsolationError,
    McplocError,
)
from .multi import multi_localize

SCORE_CHOICES = ("identity", "oracle-gaussian", "oracle-cauchy", "kde", "classifier")
TEST_CHOICES = ("empirical", "asymptotic", "hybrid", "permutation")
COMBINER_CHOICES = ("auto", "minimum", "fisher", "bonferroni")


def _fmt_float(x):
    return f"{x:.17g}"


def _to_json(obj, indent=0):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  {json.dumps(str(k))}: {_to_json(v, indent + 1)}' for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {_to_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def _write_atomic(path, text):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_json(path, obj):
    _write_atomic(path, _to_json(obj) + "\n")


def read_dataset_csv(path):
    """One observation per row; a header row is honored when present, and
    headerless files are read as a single value column (or d columns)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            raise ConfigurationError(f"{path}: empty input file")
        try:
            rows.append([float(c) for c in first if c.strip() != ""])
        except ValueError:
            pass  # header row
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row if c.strip() != ""])
            except ValueError:
                raise ConfigurationError(f"{path}: line {lineno}: non-numeric value")
    if not rows:
        raise ConfigurationError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ConfigurationError(f"{path}: rows have inconsistent column counts {sorted(widths)}")
    if widths == {0}:
        raise ConfigurationError(f"{path}: rows carry no values")
    try:
        return Dataset(np.asarray(rows, dtype=float))
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigurationError, DegenerateDataError, IsolationError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except (ValueError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except McplocError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)

    return wrapper


@click.group()
@click.version_option()
def main():
    """Offline changepoint localization with conformal p-values."""


def _localize_options(fn):
    opts = [
        click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False)),
        click.option("--score", type=click.Choice(SCORE_CHOICES), default="identity", show_default=True),
        click.option("--delta", type=float, default=1.0, show_default=True,
                     help="Location shift for the oracle score densities."),
        click.option("--probs", "probs_path", type=click.Path(exists=True, dir_okay=False),
                     help="Class-probability CSV (classifier score only)."),
        click.option("--alpha", type=float, default=0.05, show_default=True),
        click.option("--test", "test_method", type=click.Choice(TEST_CHOICES),
                     default="empirical", show_default=True),
        click.option("--combiner", type=click.Choice(COMBINER_CHOICES), default="auto",
                     show_default=True),
        click.option("--B", "n_sims", type=int, default=testing.DEFAULT_B, show_default=True,
                     help="Simulated null datasets (empirical/hybrid/permutation tests)."),
        click.option("--seed", type=int, required=True),
        click.option("--workers", type=int, default=1, show_default=True),
        click.option("--cache-dir", type=click.Path(file_okay=False), default=None,
                     help="Null-table cache directory (default: MCP_CACHE_DIR)."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _resolve_family(score, delta, probs_path):
    if score == "classifier" and probs_path is None:
        raise ConfigurationError("--score classifier requires --probs")
    return make_score_family(score, delta=delta, probs=probs_path)


def _plot_csv_text(pvalues, alpha):
    lines = ["t,p_value,threshold"]
    for t, p in enumerate(pvalues.values, start=1):
        lines.append(f"{t},{_fmt_float(p)},{_fmt_float(alpha)}")
    return "\n".join(lines) + "\n"


@main.command("localize")
@_localize_options
@click.option("--known-changepoint", is_flag=True,
              help="Skip the no-change candidate t = n.")
@click.option("--output", type=click.Path(dir_okay=False), default="result.json", show_default=True)
@click.option("--plot-csv", "plot_path", type=click.Path(dir_okay=False), default=None,
              help="p-value curve destination [default: <output>.pvalues.csv]")
@click.option("--format", "out_format", type=click.Choice(("json", "csv")), default="json",
              show_default=True, help="Result format; csv writes the p-value curve only.")
@_handle_errors
def cmd_localize(input_path, score, delta, probs_path, alpha, test_method, combiner,
                 n_sims, seed, workers, cache_dir, known_changepoint, output,
                 plot_path, out_format):
    """Localize a single changepoint in a CSV dataset."""
    data = read_dataset_csv(input_path)
    family = _resolve_family(score, delta, probs_path)
    rng = RandomStream(seed)
    pvalues, conf = _localize(
        data, family, alpha, rng,
        test_method=test_method,
        combiner=None if combiner == "auto" else combiner,
        B=n_sims, known_changepoint=known_changepoint,
        cache_dir=cache_dir, workers=workers,
    )
    config = {
        "input": os.path.basename(input_path),
        "score": score, "delta": delta, "alpha": alpha,
        "test_method": test_method, "combiner": pvalues.combiner,
        "B": n_sims, "known_changepoint": known_changepoint,
    }
    if out_format == "csv":
        _write_atomic(output, _plot_csv_text(pvalues, alpha))
    else:
        _write_json(output, result_dict(pvalues, conf, seed=seed, config=config))
        if plot_path is None:
            plot_path = f"{output}.pvalues.csv"
        _write_atomic(plot_path, _plot_csv_text(pvalues, alpha))
    hull = f"[{conf.hull[0]}, {conf.hull[1]}]" if conf.hull else "(empty)"
    click.echo(
        f"point estimate {conf.point_estimate}, {len(conf.members)} members in hull {hull}, "
        f"contains_n={str(conf.contains_n).lower()} (seed {seed})"
    )


@main.command("multi")
@_localize_options
@click.option("-K", "n_changepoints", type=int, required=True, help="Number of changepoints.")
@click.option("--output", type=click.Path(dir_okay=False), default="multi_result.json",
              show_default=True)
@_handle_errors
def cmd_multi(input_path, score, delta, probs_path, alpha, test_method, combiner,
              n_sims, seed, workers, cache_dir, n_changepoints, output):
    """Localize K changepoints: kernel segmentation, then one confidence
    set per isolation window."""
    data = read_dataset_csv(input_path)
    family = _resolve_family(score, delta, probs_path)
    rng = RandomStream(seed)
    windows = multi_localize(
        data, n_changepoints, family, alpha, rng,
        test_method=test_method,
        combiner=None if combiner == "auto" else combiner,
        B=n_sims, cache_dir=cache_dir, workers=workers,
    )
    config = {
        "input": os.path.basename(input_path),
        "score": score, "delta": delta, "alpha": alpha,
        "test_method": test_method, "combiner": combiner,
        "B": n_sims, "K": n_changepoints,
    }
    payload = []
    for w in windows:
        payload.append({
            "window": list(w.window),
            "kcpd_estimate": w.kcpd_estimate,
            "alpha": alpha,
            "p_values": [float(v) for v in w.pvalues],
            "members": w.conf_set.members,
            "hull": list(w.conf_set.hull) if w.conf_set.hull else None,
            "point_estimate": w.conf_set.point_estimate,
        })
    _write_json(output, {"windows": payload, "config": config, "seed": seed})
    for w in windows:
        hull = w.conf_set.hull
        hull_s = f"[{hull[0]}, {hull[1]}]" if hull else "(empty)"
        click.echo(f"window ({w.window[0]}, {w.window[1]}]: estimate {w.conf_set.point_estimate}, hull {hull_s}")


@main.command("null-table")
@click.option("--n", "n", type=int, required=True)
@click.option("--B", "n_sims", type=int, default=testing.DEFAULT_B, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), default=None,
              help="Explicit file path [default: cache-dir layout].")
@click.option("--cache-dir", type=click.Path(file_okay=False), default=None,
              help="Cache directory (default: MCP_CACHE_DIR, else cwd).")
@_handle_errors
def cmd_null_table(n, n_sims, seed, workers, output, cache_dir):
    """Build and store the simulated null table for length-n datasets.

    A localize run with the same seed, n and B reuses this table when it
    finds the file in its cache directory."""
    rng = RandomStream(seed).substream("null-table")
    table = testing.build_null_table(n, n_sims, rng, workers=workers)
    if output is None:
        base = cache_dir or os.environ.get("MCP_CACHE_DIR") or "."
        os.makedirs(base, exist_ok=True)
        output = testing.null_table_path(base, n, n_sims, table.fingerprint)
    testing.save_null_table(table, output)
    click.echo(f"wrote {output} (n={n}, B={n_sims}, seed {seed})")


@main.command("bench")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="TOML experiment config.")
@click.option("--output-dir", type=click.Path(file_okay=False), default=".", show_default=True)
@_handle_errors
def cmd_bench(config_path, output_dir):
    """Run a benchmark config; write report JSON/CSV and power-curve CSV."""
    config = load_config(config_path)
    report = run_experiment(config)
    os.makedirs(output_dir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(config_path))[0]
    _write_json(os.path.join(output_dir, f"{stem}_report.json"), report.to_dict())
    _write_atomic(os.path.join(output_dir, f"{stem}_report.csv"), report.summary_csv())
    for alpha in report.power:
        _write_atomic(
            os.path.join(output_dir, f"{stem}_power_a{alpha:g}.csv"),
            report.power_csv(alpha),
        )
    click.echo(f"{'alpha':>8} {'width':>10} {'coverage':>10} {'bias':>8} {'mad':>8}")
    for row in report.rows:
        click.echo(
            f"{row.alpha:>8g} {row.avg_width:>10.2f} {row.coverage:>10.3f} "
            f"{report.bias:>8.2f} {report.mad:>8.2f}"
        )
    if report.failures:
        click.echo(f"({len(report.failures)} failed trials recorded in the report)", err=True)


@main.command("np-oracle")
@click.option("--atoms", type=int, default=4, show_default=True)
@click.option("--n", type=int, default=6, show_default=True)
@click.option("--trials", type=int, default=20000, show_default=True)
@click.option("--scores", "n_scores", type=int, default=50, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--output", type=click.Path(dir_okay=False), default=None)
@_handle_errors
def cmd_np_oracle(atoms, n, trials, n_scores, seed, output):
    """Check that the likelihood-ratio score maximizes the expected
    normalized conformal rank on random discrete (Q, R) pairs."""
    if atoms < 2 or atoms > 8:
        raise ConfigurationError(f"need 2 <= atoms <= 8, got {atoms}")
    rng = RandomStream(seed)
    gq = rng.generator("q-masses").random(atoms) + 0.05
    gr = rng.generator("r-masses").random(atoms) + 0.05
    report = np_power_oracle(gq / gq.sum(), gr / gr.sum(), n, trials, rng, n_scores=n_scores)
    margin = report.min_delta_margin()
    verdict = "ok" if margin >= 0 else "VIOLATION"
    if output:
        payload = report.to_dict()
        payload.update({"seed": seed, "min_delta_margin": margin, "verdict": verdict})
        _write_json(output, payload)
    click.echo(
        f"lr rank mean {report.lr_mean:.4f}; min (delta + 2 se) over "
        f"{len(report.rows)} scores = {_fmt_float(margin)} -> {verdict} (seed {seed})"
    )
    if margin < 0:
        sys.exit(3)


if __name__ == "__main__":
    main()

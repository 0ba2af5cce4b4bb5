"""Command-line client for the lab service.

Every subcommand issues one HTTP request.  By default the service app is
mounted in-process (no daemon needed); --server targets a running instance
instead, in which case file paths in requests resolve on the server host.

Subcommand summaries print as JSON on standard output; diagnostics go to
standard error.  Exit codes: 0 success, 2 configuration error, 3 data
validation error, 4 numerical failure, 1 anything else.
"""

from __future__ import annotations

import json
import sys

import click

from .errors import EXIT_CONFIG


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    # In-process mount of the service app through the same HTTP surface.
    import warnings

    with warnings.catch_warnings():
        # starlette deprecates its httpx-backed TestClient in favor of a
        # package the index does not carry yet; the client works fine
        warnings.filterwarnings("ignore", module="starlette.testclient")
        warnings.filterwarnings("ignore", message=".*httpx.*")
        from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _call(ctx, path: str, payload: dict) -> dict:
    with _client(ctx.obj.get("server")) as client:
        try:
            response = client.post(path, json=payload)
        except Exception as exc:  # connection problems against --server
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail")
        except ValueError:
            detail = response.text
        if isinstance(detail, dict) and "exit_code" in detail:
            click.echo(f"error: {detail.get('message', detail)}", err=True)
            sys.exit(int(detail["exit_code"]))
        click.echo(f"error: {detail}", err=True)
        sys.exit(EXIT_CONFIG if response.status_code in (400, 422) else 1)
    return response.json()


def _emit(data: dict) -> None:
    click.echo(json.dumps(data, indent=2))


@click.group()
@click.option("--server", envvar="POWLAB_SERVER", default=None, metavar="URL",
              help="Run against a remote service instead of in-process.")
@click.pass_context
def main(ctx, server):
    """Proof-of-work difficulty-control laboratory."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command()
@click.option("--config", "config_path", required=True, metavar="PATH",
              help="Experiment JSON (or a bundled name such as 'fig4').")
@click.option("--out", "out_trace", default=None, metavar="TRACE.CSV",
              help="Where to write the block trace.")
@click.option("--seed", type=int, default=None,
              help="Override the config's RNG seed.")
@click.pass_context
def simulate(ctx, config_path, out_trace, seed):
    """Run one configured simulation and print its summary."""
    payload = {"config_path": config_path, "out_trace": out_trace, "seed": seed}
    result = _call(ctx, "/simulate", payload)
    result.pop("config", None)  # echoed in full in the trace report files
    _emit(result)


@main.command()
@click.option("--A", "scale", type=float, required=True,
              help="Volatility scale (> 0).")
@click.option("--B", "slope", type=float, required=True,
              help="Responsiveness slope, 1/seconds (> 0).")
@click.option("--C", "center", type=float, required=True,
              help="Neutral block-time sum, seconds.")
@click.option("--D", "shift", type=float, default=None,
              help="Vertical shift; fixed input when solving for the center.")
@click.option("--dist", type=click.Choice(["exponential", "erlang"]),
              default="exponential", show_default=True,
              help="Stationary law of the update input.")
@click.option("--beta", type=float, required=True,
              help="Single-block mean time, seconds.")
@click.option("--shape", type=int, default=1, show_default=True,
              help="Erlang shape (number of summed block times).")
@click.option("--solve-for", type=click.Choice(["shift", "center"]),
              default="shift", show_default=True)
@click.option("--out", "out_report", default=None, metavar="REPORT.JSON")
@click.pass_context
def calibrate(ctx, scale, slope, center, shift, dist, beta, shape, solve_for,
              out_report):
    """Solve the arctan rule for zero drift and report the residual."""
    payload = {
        "scale": scale, "slope": slope, "center": center, "shift": shift,
        "distribution": {"kind": dist, "block_mean": beta, "shape": shape},
        "solve_for": solve_for, "out_report": out_report,
    }
    _emit(_call(ctx, "/calibrate", payload))


@main.command()
@click.option("--config", "config_path", default=None, metavar="PATH",
              help="JSON with training fields (flags below override it).")
@click.option("--out", "out_model", required=True, metavar="MODEL.JSON")
@click.option("--report", "out_report", default=None, metavar="REPORT.JSON")
@click.option("--samples", type=int, default=None,
              help="Training samples per class.")
@click.option("--eval-samples", type=int, default=None,
              help="Held-out evaluation samples per class.")
@click.option("--epochs", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.pass_context
def train(ctx, config_path, out_model, out_report, samples, eval_samples,
          epochs, seed):
    """Train the variance-pattern indicator network."""
    payload = {}
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                payload.update(json.load(fh))
        except FileNotFoundError:
            click.echo(f"error: training config not found: {config_path}", err=True)
            sys.exit(EXIT_CONFIG)
        except json.JSONDecodeError as exc:
            click.echo(f"error: {config_path} is not valid JSON: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
    payload["out_model"] = out_model
    payload["out_report"] = out_report
    for key, value in (("samples_per_class", samples),
                       ("eval_samples_per_class", eval_samples),
                       ("epochs", epochs), ("seed", seed)):
        if value is not None:
            payload[key] = value
    result = _call(ctx, "/train", payload)
    result.pop("report", None)  # full report goes to --report
    _emit(result)


def _parse_periods(spec: str) -> list[dict]:
    periods = []
    for i, chunk in enumerate(spec.split(",")):
        chunk = chunk.strip()
        if not chunk:
            continue
        name, _, bounds = chunk.rpartition("=")
        name = name or f"period{i + 1}"
        try:
            start, end = bounds.split(":")
            periods.append({"name": name, "start": int(start), "end": int(end)})
        except ValueError:
            click.echo(
                f"error: bad period {chunk!r}, expected [name=]start:end", err=True)
            sys.exit(EXIT_CONFIG)
    return periods


@main.command()
@click.option("--trace", "traces", multiple=True, required=True, metavar="TRACE.CSV",
              help="One trace, or baseline then candidate.")
@click.option("--periods", default=None, metavar="SPEC",
              help="Comma-separated [name=]start:end height intervals.")
@click.option("--W", "windows", default=None, metavar="LIST",
              help="Comma-separated rate-estimation window lengths.")
@click.option("--target-time", type=float, default=None,
              help="Setpoint block time for period metrics.")
@click.option("--out", "out_report", default=None, metavar="REPORT.JSON")
@click.pass_context
def analyze(ctx, traces, periods, windows, target_time, out_report):
    """Period metrics and rate-change statistics; compares two traces."""
    if len(traces) > 2:
        click.echo("error: at most two traces", err=True)
        sys.exit(EXIT_CONFIG)
    payload = {"traces": list(traces), "target_time": target_time,
               "out_report": out_report}
    if periods:
        payload["periods"] = _parse_periods(periods)
    if windows:
        try:
            payload["window_lengths"] = [int(w) for w in windows.split(",") if w]
        except ValueError:
            click.echo(f"error: bad window list {windows!r}", err=True)
            sys.exit(EXIT_CONFIG)
    result = _call(ctx, "/analyze", payload)
    _emit(result["report"])


@main.command()
@click.option("--out", "out_dir", required=True, metavar="DIR")
@click.option("--quick", is_flag=True, help="1/10-scale smoke run.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Trace RNG seed.")
@click.option("--model", "model_path", default=None, metavar="MODEL.JSON",
              help="Reuse a trained indicator model instead of training.")
@click.option("--samples", "samples_per_class", type=int, default=1200,
              show_default=True)
@click.option("--train-seed", type=int, default=2718, show_default=True)
@click.pass_context
def replicate(ctx, out_dir, quick, seed, model_path, samples_per_class,
              train_seed):
    """Full pipeline: scenario, both controllers, comparison report."""
    payload = {"out_dir": out_dir, "quick": quick, "seed": seed,
               "model_path": model_path, "samples_per_class": samples_per_class,
               "train_seed": train_seed}
    result = _call(ctx, "/replicate", payload)
    _emit(result["report"])


if __name__ == "__main__":
    main()

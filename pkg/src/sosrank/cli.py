"""Command-line client for the sosrank service.

Every subcommand builds a request, sends it to the FastAPI app (in the
same process by default, or to a remote server given ``--server``) and
renders the response. Exit codes: 0 success (including rows that report
none/timeout), 2 internal verification failure, 3 precondition
violation, 4 malformed input.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

import click
import httpx

from . import cache

EXIT_CODES = {"verification": 2, "precondition": 3, "input": 4}


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service import app

    # TestClient is a sync httpx.Client speaking ASGI directly, so the
    # default mode needs no running server.
    return TestClient(app, raise_server_exceptions=False)


def _post(ctx_server: str | None, path: str, payload: dict) -> dict:
    with _client(ctx_server) as client:
        resp = client.post(path, json=payload)
    body = resp.json()
    if resp.status_code != 200:
        detail = body.get("detail", body)
        if isinstance(detail, dict) and "code" in detail:
            click.echo(f"error: {detail['message']}", err=True)
            sys.exit(EXIT_CODES.get(detail["code"], 4))
        click.echo(f"error: {detail}", err=True)
        sys.exit(4)
    return body


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)
        if not text.endswith("\n"):
            click.echo()


def _parse_signs(signs: str | None) -> list[int] | None:
    if signs is None:
        return None
    table = {"+": 1, "+1": 1, "1": 1, "-": -1, "-1": -1, "0": 0}
    try:
        return [table[tok.strip()] for tok in signs.split(",")]
    except KeyError:
        click.echo(f"error: bad sign vector {signs!r}; use e.g. +,-,0", err=True)
        sys.exit(4)


def _config(workers, cache_dir, no_verify, time_limit, dd_order, fmt="json") -> dict:
    return {
        "workers": workers,
        "cache_dir": cache_dir if cache_dir is not None else cache.default_cache_dir(),
        "output_format": fmt,
        "verify": not no_verify,
        "time_limit_s": time_limit,
        "dd_order": dd_order,
    }


def common_options(f):
    f = click.option("--server", default=None, help="URL of a running service; default runs in-process")(f)
    f = click.option("--workers", default=1, show_default=True, type=click.IntRange(1))(f)
    f = click.option("--cache-dir", default=None, help="ray cache directory (env OKSOS_CACHE)")(f)
    f = click.option("--no-verify", is_flag=True, help="skip cross-checks and re-certification")(f)
    f = click.option("--time-limit", default=None, type=click.IntRange(1), help="per-row limit in seconds")(f)
    f = click.option(
        "--dd-order", default="sparse", show_default=True,
        help="constraint insertion order: sparse | natural | seeded:SEED",
    )(f)
    f = click.option("--format", "fmt", default="json", type=click.Choice(["json", "csv"]), show_default=True)(f)
    f = click.option("--out", default=None, help="output file (default stdout)")(f)
    return f


@click.group(name="sosrank")
def cli():
    """Exact minimal-rank computations for prolonged SOS polynomials."""


def main():
    # click exits with 2 on usage errors, which collides with our
    # verification-failure code; remap bad invocations to 4.
    try:
        rv = cli.main(standalone_mode=False)
        sys.exit(rv if isinstance(rv, int) else 0)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(4)
    except click.exceptions.Abort:
        sys.exit(4)


@cli.command()
@click.option("--n", required=True, type=click.IntRange(1))
@click.option("--d", required=True, type=click.IntRange(0))
@click.option("--signs", default=None, help="comma-separated +,-,0 per variable")
@common_options
def jmat(n, d, signs, server, workers, cache_dir, no_verify, time_limit, dd_order, fmt, out):
    """Emit the multiplication-by-norm matrix for (n, d)."""
    body = _post(
        server,
        "/jmat",
        {
            "n": n,
            "d": d,
            "signs": _parse_signs(signs),
            "config": _config(workers, cache_dir, no_verify, time_limit, dd_order, fmt),
        },
    )
    if fmt == "csv":
        dense = [[0] * body["cols"] for _ in range(body["rows"])]
        for r, c, s in body["entries"]:
            dense[r][c] = s
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(dense)
        _emit(buf.getvalue(), out)
    else:
        _emit(json.dumps(body, separators=(",", ":")), out)


@cli.command()
@click.option("--n", required=True, type=click.IntRange(2))
@click.option("--d", required=True, type=click.IntRange(1))
@click.option("--signs", default=None)
@click.option("--check", "recheck", is_flag=True, help="re-certify every vertex even with --no-verify")
@common_options
def vertices(n, d, signs, recheck, server, workers, cache_dir, no_verify, time_limit, dd_order, fmt, out):
    """Enumerate the vertices of the trace-1 slice of the prolongation cone."""
    body = _post(
        server,
        "/vertices",
        {
            "n": n,
            "d": d,
            "signs": _parse_signs(signs),
            "config": _config(workers, cache_dir, no_verify and not recheck, time_limit, dd_order, fmt),
        },
    )
    if fmt == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(body["vertices"])
        _emit(buf.getvalue(), out)
    else:
        _emit(json.dumps(body["vertices"], separators=(",", ":")), out)
    click.echo(f"{body['count']} vertices (certified: {body['certified']})", err=True)


@cli.command()
@click.option("--n", required=True, type=click.IntRange(2))
@click.option("--d", required=True, type=click.IntRange(1))
@click.option("--signs", default=None)
@common_options
def minrank(n, d, signs, server, workers, cache_dir, no_verify, time_limit, dd_order, fmt, out):
    """Minimal prolonged rank over non-simplex vertices."""
    body = _post(
        server,
        "/minrank",
        {
            "n": n,
            "d": d,
            "signs": _parse_signs(signs),
            "config": _config(workers, cache_dir, no_verify, time_limit, dd_order, fmt),
        },
    )
    summary = body.pop("summary")
    _emit(json.dumps(body, separators=(",", ":")), out)
    click.echo(summary, err=bool(out) is False)


@cli.command()
@click.option("--pairs", default=None, help="comma-separated n:d pairs, e.g. 2:2,3:2")
@click.option("--max-sum", default=None, type=click.IntRange(4), help="all pairs with n>=2, d>=2, n+d <= S")
@common_options
def table(pairs, max_sum, server, workers, cache_dir, no_verify, time_limit, dd_order, fmt, out):
    """Compute min-rank values for a batch of (n, d) pairs."""
    plist: list[tuple[int, int]] = []
    if pairs:
        for tok in pairs.split(","):
            try:
                a, b = tok.split(":")
                plist.append((int(a), int(b)))
            except ValueError:
                click.echo(f"error: bad pair {tok!r}; use n:d", err=True)
                sys.exit(4)
    if max_sum:
        plist.extend(
            (n, d)
            for n in range(2, max_sum - 1)
            for d in range(2, max_sum - n + 1)
        )
    if not plist:
        click.echo("error: give --pairs or --max-sum", err=True)
        sys.exit(4)
    body = _post(
        server,
        "/table",
        {"pairs": plist, "config": _config(workers, cache_dir, no_verify, time_limit, dd_order, fmt)},
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "d", "R_diag", "witnesses", "status", "elapsed_ms"])
    for r in body["rows"]:
        writer.writerow(
            [r["n"], r["d"], "none" if r["value"] is None else r["value"],
             r["witness_count"], r["status"], r["elapsed_ms"]]
        )
    _emit(buf.getvalue(), out)
    for chk in body["pattern_checks"]:
        click.echo(f"check {chk['name']}: {'ok' if chk['passed'] else 'FAILED'}", err=True)


@cli.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--n", required=True, type=click.IntRange(1))
@click.option("--d", required=True, type=click.IntRange(0))
@common_options
def check(file, n, d, server, workers, cache_dir, no_verify, time_limit, dd_order, fmt, out):
    """Report SOS membership and prolonged rank for a Hermitian matrix file."""
    try:
        obj = json.loads(Path(file).read_text())
    except json.JSONDecodeError as exc:
        click.echo(f"error: invalid JSON: {exc}", err=True)
        sys.exit(4)
    if not isinstance(obj, dict) or "size" not in obj or "entries" not in obj:
        click.echo("error: input not Hermitian", err=True)
        sys.exit(4)
    body = _post(server, "/check", {"n": n, "d": d, "matrix": obj})
    _emit(json.dumps(body, separators=(",", ":")), out)


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service under uvicorn."""
    import uvicorn

    uvicorn.run("sosrank.service:app", host=host, port=port)


if __name__ == "__main__":
    main()

"""Command line front end.

Exit codes: 0 every applicable block holds, 1 some block violated,
2 invalid input, 3 nothing applicable or decidable.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import click

from bcq import __version__
from bcq.bounds import (
    chung_erdos,
    erdos_renyi_schedule,
    first_bc_quantitative,
    generalized_bc_series,
    kochen_stone_quantitative,
    markov_coefficient_report,
    power_coefficient,
    product_recursion_check,
    second_bc_quantitative,
    second_moment_ratio,
    switch_identity_check,
    weighted_divergence_series,
)
from bcq.enclosure import RationalEnclosure
from bcq.errors import BCQError, InvalidInput
from bcq.modelfile import ModelSpecDocument, load_document, parse_model
from bcq.models import block_count
from bcq.montecarlo import Query, SimulationPlan, estimate_query, horizon_sweep
from bcq.rates import OK, RateFunction, convergence_rate, correlation_rate, divergence_rate
from bcq.report import BoundReport, encode

CHECKS = {
    "chung-erdos": ("n",),
    "second-moment": ("n",),
    "generalized-bc": ("m", "H"),
    "switch-identity": ("N",),
    "power-coefficient": ("n", "H"),
    "markov-power": ("n",),
    "recursion": ("n", "k", "H"),
    "weighted-series": ("H",),
    "first-bc": ("l", "m"),
    "second-bc": ("n", "N"),
    "erdos-renyi": ("n", "l"),
    "kochen-stone": ("m", "l"),
}


@dataclass
class RunResult:
    output: str
    exit_code: int
    outcome: dict


def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, Fraction):
        s = str(x)
        return s if len(s) <= 40 else f"{float(x):.15g}"
    if isinstance(x, RationalEnclosure):
        return str(x)
    return str(x)


def _table(values: str | None, first_level: int, kind: str, blocks: int) -> RateFunction | None:
    """``auto`` -> None; otherwise a comma list of indices for consecutive levels."""
    if values is None or values == "auto":
        return None
    try:
        idx = [int(v) for v in values.split(",")]
    except ValueError:
        raise InvalidInput(f"--{kind} takes 'auto' or a comma-separated list of integers") from None
    table = {first_level + i: v for i, v in enumerate(idx)}
    return RateFunction(kind, tuple(dict(table) for _ in range(blocks)),
                        (OK,) * blocks, ("claimed",) * blocks)


def _need(params: dict, check: str) -> None:
    missing = [p for p in CHECKS[check] if params.get(p) is None]
    if missing:
        raise InvalidInput(f"check {check} needs " + ", ".join(f"--{p}" for p in missing))


def _run_check(model, check: str, p: dict) -> BoundReport:
    _need(p, check)
    blocks = block_count(model)
    if check == "chung-erdos":
        return chung_erdos(model, p["n"])
    if check == "second-moment":
        return second_moment_ratio(model, p["n"])[1]
    if check == "generalized-bc":
        return generalized_bc_series(model, p["m"], p["H"])[1]
    if check == "switch-identity":
        return switch_identity_check(model, p["N"])
    if check == "power-coefficient":
        return power_coefficient(model, p["n"], p["H"]).report()
    if check == "markov-power":
        return markov_coefficient_report(model, p["n"])
    if check == "recursion":
        return product_recursion_check(model, p["n"], p["k"], p["H"])
    if check == "weighted-series":
        return weighted_divergence_series(model, p["H"]).report()
    if check == "first-bc":
        phi = _table(p.get("phi"), 0, "phi", blocks) or convergence_rate(model, p["l"])
        return first_bc_quantitative(model, phi, p["l"], p["m"])
    if check == "second-bc":
        M = p["n"] + p["N"] - 1
        psi = _table(p.get("psi"), 1, "psi", blocks) or divergence_rate(model, M)
        return second_bc_quantitative(model, psi, p["n"], p["N"])
    if check == "erdos-renyi":
        psi = _table(p.get("psi"), 1, "psi", blocks) or divergence_rate(model, 2 * p["n"])
        return erdos_renyi_schedule(model, psi, None, p["n"], p["l"])
    mult, add = p.get("g_mult", 2), p.get("g_add", 0)
    psi = _table(p.get("phi"), 1, "psi", blocks)
    return kochen_stone_quantitative(model, psi, p["m"], p["l"], lambda i: mult * i + add,
                                     n_max=p.get("n_max", 10_000), g_name=f"{mult}*i+{add}")


def _select_blocks(block: str, count: int) -> list[int]:
    if block in (None, "all"):
        return list(range(count))
    try:
        b = int(block)
    except ValueError:
        raise InvalidInput(f"--block takes an index or 'all', got {block!r}") from None
    if not 0 <= b < count:
        raise InvalidInput(f"block {b} out of range 0..{count - 1}")
    return [b]


def report_tsv(report: BoundReport) -> str:
    lines = ["check\tblock\tlabel\trelation\tlhs\trhs\tmargin\tverdict\tnote"]
    for r in report.rows:
        lines.append("\t".join([report.theorem, str(r.block), r.label or "-", r.relation,
                                _fmt(r.lhs), _fmt(r.rhs), _fmt(r.margin), r.verdict, r.note or "-"]))
    lines.append(f"# status\t{report.status}")
    return "\n".join(lines) + "\n"


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def run_verify(doc: ModelSpecDocument, params: dict) -> RunResult:
    report = _run_check(doc.model, params["check"], params)
    report = report.restrict(_select_blocks(params.get("block"), block_count(doc.model)))
    data = report.to_dict()
    out = _dumps(data) if params.get("format") == "json" else report_tsv(report)
    return RunResult(out, report.exit_code, {"status": report.status,
                                             "verdicts": [r["verdict"] for r in data["rows"]]})


def run_rates(doc: ModelSpecDocument, params: dict) -> RunResult:
    model = doc.model
    which = params["which"]
    blocks = _select_blocks(params.get("block"), block_count(model))
    budget = params.get("budget") or 10**6
    if which == "psi":
        rate = divergence_rate(model, params.get("N_max") or 5, n_budget=budget)
        data = rate.to_dict()
        statuses = [rate.status[b] for b in blocks]
    elif which == "phi":
        rate = convergence_rate(model, params.get("l_max") if params.get("l_max") is not None else 8)
        data = rate.to_dict()
        statuses = [rate.status[b] for b in blocks]
    else:
        level, n = params.get("l") or 0, params.get("n") or 1
        corr = correlation_rate(model, level, n, j_budget=budget)
        data = corr.to_dict()
        statuses = [OK if corr.value(b, level, n) is not None else corr.failure(b, level, n)
                    for b in blocks]
    data["blocks"] = [data["blocks"][b] for b in blocks]
    code = 0 if OK in statuses else 3
    if params.get("format") == "json":
        out = _dumps(data)
    else:
        lines = ["kind\tblock\tstatus\tlevel\tindex"]
        for entry in data["blocks"]:
            b = entry["block"]
            if which == "corr":
                rows = [(f"{e['l']},{e['n']}", e["phi"]) for e in entry["entries"]]
                status = "ok" if rows else entry["failures"][0]["status"]
            else:
                rows = list(entry["table"].items())
                status = entry["status"]
            if not rows:
                lines.append(f"{which}\t{b}\t{status}\t-\t-")
            for level, idx in rows:
                lines.append(f"{which}\t{b}\t{status}\t{level}\t{idx}")
        out = "\n".join(lines) + "\n"
    return RunResult(out, code, {"statuses": statuses})


def _query(params: dict) -> Query:
    picked = [k for k in ("union", "pattern", "pairwise") if params.get(k)]
    if len(picked) != 1:
        raise InvalidInput("choose exactly one of --union, --pattern, --pairwise")
    a, b = params[picked[0]]
    return Query(picked[0], a, b)


def run_simulate(doc: ModelSpecDocument, params: dict) -> RunResult:
    query = _query(params)
    sweep = params.get("sweep")
    horizons = [int(h) for h in sweep.split(",")] if sweep else None
    horizon = params.get("horizon") or max([query.last_index] + (horizons or []))
    plan = SimulationPlan(doc.model, horizon, params["trials"], params["seed"], query,
                          params.get("delta") or 0.01)
    blocks = _select_blocks(params.get("block"), block_count(doc.model))
    code = 0
    if horizons:
        sw = horizon_sweep(plan, horizons)
        data = {"query": query.describe(), "seed": plan.seed, "horizons": list(sw.horizons),
                "estimates": [e.to_dict() for e in sw.estimates],
                "trend": [sw.trend[b] for b in blocks]}
        lines = ["block\thorizon\testimate\tapprox\tepsilon"]
        for h, e in zip(sw.horizons, sw.estimates):
            for b in blocks:
                v = e.values[b]
                lines.append(f"{b}\t{h}\t{v}\t{float(v):.6f}\t{e.epsilon:.6f}")
        lines += [f"# trend\t{b}\t{sw.trend[b]}" for b in blocks]
        outcome = {"trend": data["trend"]}
    else:
        est = estimate_query(plan)
        data = {"query": query.describe(), "seed": plan.seed, "estimate": est.to_dict()}
        lines = ["block\testimate\tapprox\tepsilon\tdelta" + ("\texact\tcovered" if params.get("assert_oracle") else "")]
        covered = None
        if params.get("assert_oracle"):
            exact = query.exact(doc.model)
            covered = est.covers(exact)
            data["exact"] = [str(v) for v in exact.values]
            data["covered"] = covered
            if not all(covered[b] for b in blocks):
                code = 1
        for b in blocks:
            v = est.values[b]
            line = f"{b}\t{v}\t{float(v):.6f}\t{est.epsilon:.6f}\t{est.delta}"
            if covered is not None:
                line += f"\t{data['exact'][b]}\t{covered[b]}"
            lines.append(line)
        outcome = {"counts": [est.counts[b] for b in blocks], "covered": covered}
    out = _dumps(data) if params.get("format") == "json" else "\n".join(lines) + "\n"
    return RunResult(out, code, outcome)


COMMANDS = {"verify": run_verify, "rates": run_rates, "simulate": run_simulate}


def execute(command: str, doc: ModelSpecDocument, params: dict) -> RunResult:
    try:
        return COMMANDS[command](doc, params)
    except BCQError as exc:
        return RunResult(f"error: {exc}\n", exc.exit_code, {"error": str(exc)})


def _record(manifest: str | None, command: str, doc: ModelSpecDocument, params: dict,
            result: RunResult, elapsed: float) -> None:
    if not manifest:
        return
    path = Path(manifest)
    data = json.loads(path.read_text()) if path.exists() else {"tool": "bcq", "runs": []}
    data["runs"].append({
        "command": command,
        "version": __version__,
        "params": params,
        "seeds": [params["seed"]] if "seed" in params else [],
        "model": doc.raw,
        "exit_code": result.exit_code,
        "outcome": result.outcome,
        "output_sha256": hashlib.sha256(result.output.encode()).hexdigest(),
        "output": result.output,
        "wall_clock_s": round(elapsed, 6),
    })
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _finish(command: str, model_path: str, params: dict, manifest: str | None):
    try:
        doc = parse_model(model_path)
    except BCQError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)
    start = time.perf_counter()
    result = execute(command, doc, params)
    elapsed = time.perf_counter() - start
    if result.exit_code == 2 or "error" in result.outcome:
        click.echo(result.output, nl=False, err=True)
    else:
        click.echo(result.output, nl=False)
    _record(manifest, command, doc, params, result, elapsed)
    sys.exit(result.exit_code)


FORMAT = click.option("--format", "fmt", type=click.Choice(["tsv", "json"]), default="tsv")
BLOCK = click.option("--block", default="all", help="Conditioning block index or 'all'.")
MANIFEST = click.option("--manifest", type=click.Path(dir_okay=False),
                        help="Append this run to a replayable manifest.")


@click.group()
@click.version_option(__version__, prog_name="bcq")
def cli():
    """Exact checks of conditional Borel-Cantelli bounds on finite models."""


@cli.command()
@click.argument("model_path", type=click.Path(dir_okay=False))
@click.option("--check", required=True, type=click.Choice(sorted(CHECKS)))
@click.option("--n", "n", type=int)
@click.option("--N", "N", type=int)
@click.option("--m", "m", type=int)
@click.option("--H", "H", type=int)
@click.option("--k", "k", type=int)
@click.option("--l", "l", type=int)
@click.option("--psi", default="auto", help="'auto' or psi(1),psi(2),...")
@click.option("--phi", default="auto", help="'auto' or phi(0),phi(1),... (psi table for kochen-stone)")
@click.option("--g-mult", type=int, default=2, show_default=True)
@click.option("--g-add", type=int, default=0, show_default=True)
@click.option("--n-max", type=int, default=10_000, show_default=True)
@FORMAT
@BLOCK
@MANIFEST
def verify(model_path, check, n, N, m, H, k, l, psi, phi, g_mult, g_add, n_max, fmt, block, manifest):
    """Check one inequality blockwise and report verdicts."""
    params = {"check": check, "n": n, "N": N, "m": m, "H": H, "k": k, "l": l, "psi": psi,
              "phi": phi, "g_mult": g_mult, "g_add": g_add, "n_max": n_max, "format": fmt,
              "block": block}
    _finish("verify", model_path, params, manifest)


@cli.command()
@click.argument("model_path", type=click.Path(dir_okay=False))
@click.option("--psi", "which", flag_value="psi", help="Divergence rate psi(N).")
@click.option("--phi", "which", flag_value="phi", help="Convergence rate phi(l).")
@click.option("--corr", "which", flag_value="corr", help="Correlation rate phi(l, n).")
@click.option("--N-max", "N_max", type=int, default=5, show_default=True)
@click.option("--l-max", "l_max", type=int, default=8, show_default=True)
@click.option("--l", "l", type=int, default=0)
@click.option("--n", "n", type=int, default=1)
@click.option("--budget", type=int, default=10**6, show_default=True)
@FORMAT
@BLOCK
@MANIFEST
def rates(model_path, which, N_max, l_max, l, n, budget, fmt, block, manifest):
    """Extract rate functions per conditioning block."""
    if which is None:
        raise click.UsageError("choose one of --psi, --phi, --corr")
    params = {"which": which, "N_max": N_max, "l_max": l_max, "l": l, "n": n,
              "budget": budget, "format": fmt, "block": block}
    _finish("rates", model_path, params, manifest)


@cli.command()
@click.argument("model_path", type=click.Path(dir_okay=False))
@click.option("--trials", type=int, default=10_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--union", nargs=2, type=int)
@click.option("--pattern", nargs=2, type=int)
@click.option("--pairwise", nargs=2, type=int)
@click.option("--delta", type=float, default=0.01, show_default=True)
@click.option("--horizon", type=int)
@click.option("--sweep", help="Comma-separated ascending horizons for the union query.")
@click.option("--assert-oracle", is_flag=True, help="Exit 1 if an exact value leaves its interval.")
@FORMAT
@BLOCK
@MANIFEST
def simulate(model_path, trials, seed, union, pattern, pairwise, delta, horizon, sweep,
             assert_oracle, fmt, block, manifest):
    """Stratified Monte Carlo estimates with Hoeffding intervals."""
    params = {"trials": trials, "seed": seed, "union": list(union) if union else None,
              "pattern": list(pattern) if pattern else None,
              "pairwise": list(pairwise) if pairwise else None, "delta": delta,
              "horizon": horizon, "sweep": sweep, "assert_oracle": assert_oracle,
              "format": fmt, "block": block}
    _finish("simulate", model_path, params, manifest)


def replay(manifest_path) -> tuple[list[bool], str]:
    data = json.loads(Path(manifest_path).read_text())
    results, lines = [], []
    for i, run in enumerate(data["runs"]):
        doc = load_document(run["model"])
        again = execute(run["command"], doc, run["params"])
        same = again.output == run["output"] and again.exit_code == run["exit_code"]
        results.append(same)
        lines.append(f"run {i}\t{run['command']}\t{'reproduced' if same else 'MISMATCH'}")
    return results, "\n".join(lines) + "\n"


@cli.command()
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
def report(manifest_path):
    """Replay a manifest and confirm every run reproduces bit-exactly."""
    try:
        results, text = replay(manifest_path)
    except (BCQError, KeyError, json.JSONDecodeError) as exc:
        click.echo(f"error: malformed manifest ({exc})", err=True)
        sys.exit(2)
    click.echo(text, nl=False)
    sys.exit(0 if results and all(results) else 1)


def main():
    cli(standalone_mode=True)


if __name__ == "__main__":
    main()

"""Command-line front end.

Every command that writes files also writes ``manifest.json`` holding the
full parameter set and the SHA-256 of every input file, and
``pilotgain replay MANIFEST`` re-runs it.  Exit codes: 0 success,
1 runtime or numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, codebooks, experiments
from .channel import read_gains
from .model import PilotGainError, build_design_matrix

FORMAT_VERSION = 1

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- output helpers -----------------------------------------------------------


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def rows_to_csv(rows, columns=None) -> str:
    columns = columns or list(rows[0])
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    for r in rows:
        wr.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _manifest(command: str, params: dict, inputs: dict | None = None) -> str:
    return dumps_json(
        {
            "format_version": FORMAT_VERSION,
            "pilotgain_version": __version__,
            "command": command,
            "params": params,
            "inputs": {k: {"path": v, "sha256": _sha256(v)} for k, v in (inputs or {}).items()},
        }
    )


def _int_list(text: str):
    """Parse ``"128,512"`` or ``"2-6"`` (inclusive) or a mix of both."""
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part[1:]:
                lo, hi = part.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers like '128,512' or '2-6', got {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty integer list")
    return out


def _packing(params) -> codebooks.PackingConfig:
    return codebooks.PackingConfig(
        max_iters=params["max_iters"],
        tol=params["tol"],
        seed=params["seed"],
        restarts=params["restarts"],
        polish=not params["no_polish"],
    )


# -- commands -------------------------------------------------------------------


def cmd_codebook_gen(params) -> int:
    kind, q, k = params["kind"], params["q"], params["k"]
    if q < 1 or k < 1:
        raise UsageError("--q and --k must be positive")
    if kind in ("vandermonde", "grassmannian") and k > q * q:
        raise UsageError(f"{kind} codebooks need k <= q^2 (got k={k}, q^2={q * q})")
    try:
        pk = _packing(params)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    p = codebooks.generate(kind, q, k, params["seed"], packing=pk)
    out = Path(params["out"])
    rep = codebooks.coherence_report(p).to_dict()
    if isinstance(p.info, codebooks.PackingInfo):
        rep["packing"] = {
            "converged": p.info.converged,
            "iterations": p.info.iterations,
            "restart": p.info.restart,
        }
    rep.update({"q": q, "k": k, "kind": p.kind.value})
    _write(out, codebooks.format_codebook(p))
    _write(out.with_name(out.name + ".coherence.json"), dumps_json(rep))
    _write(out.with_name(out.name + ".manifest.json"), _manifest("codebook-gen", params))
    return EXIT_OK


def _analysis_report(p, coherence_tol):
    d = build_design_matrix(p)
    rank = d.rank()
    ne = analysis.noise_enhancement(d)
    coh = codebooks.coherence_report(p, coherence_tol)
    out = {
        "q": p.q,
        "k": p.k,
        "kind": p.kind.value,
        "rank": rank,
        "full_rank": rank == p.k,
        "coherence": coh.to_dict(),
        "noise_enhancement": ne.to_dict(),
        "average_db": ne.average_db,
        "theoretical_avg_db": None,
    }
    if p.q >= 2 and p.q < p.k <= p.q * p.q:
        out["theoretical_avg_db"] = analysis.theoretical_avg_enhancement_db(p.q, p.k)
    elif p.k <= p.q:
        out["theoretical_avg_db"] = 0.0
    return out, ne


def cmd_analyze(params) -> int:
    p = codebooks.read_codebook(params["codebook"])
    report, ne = _analysis_report(p, params["coherence_tol"])
    if params["out"]:
        out = Path(params["out"])
        _write(out / "analysis.json", dumps_json(report))
        _write(out / "noise_enhancement.csv", ne.to_csv())
        _write(out / "manifest.json", _manifest("analyze", params, {"codebook": params["codebook"]}))
    else:
        sys.stdout.write(ne.to_csv() if params["format"] == "csv" else dumps_json(report))
    if params["require_full_rank"] and not report["full_rank"]:
        print(f"error: design matrix rank {report['rank']} < K={p.k}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


TRIAL_COLUMNS = [
    "m",
    "trial",
    "nmse",
    "residual_norm",
    "iterations",
    "active_set_size",
    "kkt_max_violation",
    "converged",
    "support_recovered",
]


def cmd_simulate(params) -> int:
    p = codebooks.read_codebook(params["codebook"])
    try:
        g = read_gains(params["gains"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if g.size != p.k:
        raise UsageError(f"gains file has {g.size} entries, codebook has K={p.k}")
    if params["trials"] < 1 or any(m < 1 for m in params["m"]):
        raise UsageError("--trials and every --m must be positive")
    spec = experiments.SimulationSpec(
        m_values=tuple(params["m"]),
        trials=params["trials"],
        seed=params["seed"],
        sigma_w2=params["sigma_w2"],
        method=params["estimator"].upper(),
        exact_covariance=params["exact_covariance"],
        assumed_sigma_w2=params["assumed_sigma_w2"],
        active=params["active"],
        support_threshold=params["support_threshold"],
        max_iters=params["max_iters"],
    )
    if params["active"] is not None and not 1 <= params["active"] <= p.k:
        raise UsageError(f"--active must be in [1, {p.k}]")
    if params["active"] is None and not np.any(g > 0):
        raise UsageError("all gains are zero")
    rows = experiments.run_simulation(p, g, spec, experiments.max_workers(params["workers"]))
    summary = experiments.summarize(rows)
    out = Path(params["out"])
    _write(out / "trials.csv", rows_to_csv(rows, TRIAL_COLUMNS))
    _write(out / "summary.json", dumps_json({"method": spec.method, "per_m": summary}))
    _write(
        out / "manifest.json",
        _manifest("simulate", params, {"codebook": params["codebook"], "gains": params["gains"]}),
    )
    bad = [s for s in summary if s["unconverged_fraction"] > 0.10]
    if bad:
        print(f"error: solver hit max iterations in >10% of trials at M={[s['m'] for s in bad]}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_theory(params) -> int:
    if any(q < 2 for q in params["q"]):
        raise UsageError("--q values must be >= 2")
    rows = experiments.theory_rows(params["q"], params["k"])
    if not rows:
        raise UsageError("no (q, k) pair satisfies q < k <= q^2")
    text = rows_to_csv(rows) if params["format"] == "csv" else dumps_json(rows)
    if params["out"]:
        out = Path(params["out"])
        _write(out / ("theory.csv" if params["format"] == "csv" else "theory.json"), text)
        _write(out / "manifest.json", _manifest("theory", params))
    else:
        sys.stdout.write(text)
    return EXIT_OK


PLOT_TEMPLATE = '''"""Plot {name}.csv (generated by pilotgain; run with matplotlib installed)."""
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(HERE, "{name}.csv")) as fh:
    rows = list(csv.DictReader(fh))


def col(name):
    return [float(r[name]) if r[name] else float("nan") for r in rows]


x = col("{x}")
for name, style in {series!r}:
    plt.plot(x, col(name), style, label=name)
plt.xlabel("{xlabel}")
plt.ylabel("{ylabel}")
plt.grid(True)
plt.legend()
plt.title("{title}")
plt.savefig(os.path.join(HERE, "{name}.png"), dpi=150)
'''


def _plot_script(name, x, series, xlabel, ylabel, title):
    return PLOT_TEMPLATE.format(name=name, x=x, series=series, xlabel=xlabel, ylabel=ylabel, title=title)


def cmd_reproduce(params) -> int:
    fig = params["figure"]
    pk = _packing(params)
    workers = experiments.max_workers(params["workers"])
    if fig == "fig1":
        if params["q_min"] < 2 or params["q_max"] < params["q_min"]:
            raise UsageError("need 2 <= --q-min <= --q-max")
        rows = experiments.fig1_rows(range(params["q_min"], params["q_max"] + 1), params["seed"], pk, workers)
        script = _plot_script(
            "fig1",
            "q",
            [("gaussian_db", "b-o"), ("packed_db", "r--s"), ("theoretical_db", "k-")],
            "Q (K = Q^2)",
            "average noise enhancement per dimension [dB]",
            "Average noise enhancement per dimension",
        )
    elif fig == "fig2":
        if params["q"] < 2:
            raise UsageError("--q must be >= 2")
        rows = experiments.fig2_rows(params["q"], params["seed"], pk)
        script = _plot_script(
            "fig2",
            "dimension",
            [("gaussian_db", "b-o"), ("packed_db", "r--s"), ("theoretical_db", "k-")],
            "dimension",
            "noise enhancement [dB]",
            "Noise enhancement of each dimension",
        )
    else:
        if params["q"] < 2:
            raise UsageError("--q must be >= 2")
        rows = experiments.fig3_rows(params["q"], None, params["seed"], pk, workers)
        styles = ["k-", "r--s", "b-o", "g-^", "m-v"]
        script = _plot_script(
            "fig3",
            "k",
            list(zip(experiments.FIG3_FAMILIES, styles)),
            "K",
            "average noise enhancement per dimension [dB]",
            f"Noise enhancement versus K (Q={params['q']})",
        )
    out = Path(params["out"])
    _write(out / f"{fig}.csv", rows_to_csv(rows))
    _write(out / f"plot_{fig}.py", script)
    _write(out / "manifest.json", _manifest("reproduce", params))
    failed = [r for r in rows if not r["packed_converged"]]
    if failed:
        where = sorted({(r.get("q"), r.get("k")) for r in failed})
        print(f"error: packer did not converge at (q, k) = {where}; rows flagged in CSV", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


COMMANDS = {
    "codebook-gen": cmd_codebook_gen,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "theory": cmd_theory,
    "reproduce": cmd_reproduce,
}


def cmd_replay(manifest_path, out=None) -> int:
    with open(manifest_path, encoding="utf-8") as fh:
        man = json.load(fh)
    if man.get("format_version") != FORMAT_VERSION:
        raise UsageError(f"unsupported manifest format_version {man.get('format_version')}")
    command = man["command"]
    if command not in COMMANDS:
        raise UsageError(f"unknown command {command!r} in manifest")
    for name, rec in man.get("inputs", {}).items():
        if _sha256(rec["path"]) != rec["sha256"]:
            print(f"error: input {name} ({rec['path']}) changed since the manifest was written", file=sys.stderr)
            return EXIT_FAIL
    params = dict(man["params"])
    if out is not None:
        params["out"] = out
    return COMMANDS[command](params)


# -- argument parsing -------------------------------------------------------------


def _add_packing_args(p):
    g = p.add_argument_group("line packing")
    g.add_argument("--max-iters", type=int, default=codebooks.PackingConfig.max_iters)
    g.add_argument("--restarts", type=int, default=codebooks.PackingConfig.restarts)
    g.add_argument("--tol", type=float, default=codebooks.PackingConfig.tol)
    g.add_argument("--no-polish", action="store_true", help="skip the least-squares polish of near-equiangular packings")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pilotgain", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"pilotgain {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    cb = sub.add_parser("codebook", help="codebook utilities")
    cbsub = cb.add_subparsers(dest="codebook_command", required=True)
    gen = cbsub.add_parser("gen", help="generate a pilot codebook file")
    gen.add_argument("--kind", required=True, choices=sorted(codebooks.GENERATORS))
    gen.add_argument("--q", type=int, required=True)
    gen.add_argument("--k", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--out", required=True, help="codebook file to write")
    _add_packing_args(gen)

    an = sub.add_parser("analyze", help="rank, coherence and noise enhancement of a codebook")
    an.add_argument("codebook")
    an.add_argument("--out", help="directory for analysis.json, noise_enhancement.csv, manifest.json")
    an.add_argument("--format", choices=("json", "csv"), default="json", help="stdout format without --out")
    an.add_argument("--require-full-rank", action="store_true")
    an.add_argument("--coherence-tol", type=float, default=1e-3)

    sim = sub.add_parser("simulate", help="Monte-Carlo gain estimation over an antenna-count sweep")
    sim.add_argument("--codebook", required=True)
    sim.add_argument("--gains", required=True, help="one non-negative gain per line, K lines")
    sim.add_argument("--m", type=_int_list, required=True, help="antenna counts, e.g. 128,512,2048")
    sim.add_argument("--trials", type=int, default=20)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--sigma-w2", type=float, default=1.0)
    sim.add_argument(
        "--assumed-sigma-w2", type=float, default=None, help="noise variance the estimator subtracts (default: true value)"
    )
    sim.add_argument("--estimator", choices=("nnls", "zf"), default="nnls")
    sim.add_argument("--exact-covariance", action="store_true", help="use the M -> infinity covariance")
    sim.add_argument("--active", type=int, default=None, help="draw this many active users per trial")
    sim.add_argument("--support-threshold", type=float, default=1e-6, help="relative to max gain")
    sim.add_argument("--max-iters", type=int, default=None, help="NNLS iteration cap (default 10 K)")
    sim.add_argument("--workers", type=int, default=None)
    sim.add_argument("--out", required=True)

    th = sub.add_parser("theory", help="closed-form equiangular-frame noise enhancement")
    th.add_argument("--q", type=_int_list, default=list(range(2, 13)))
    th.add_argument("--k", type=_int_list, default=None)
    th.add_argument("--format", choices=("csv", "json"), default="csv")
    th.add_argument("--out")

    rp = sub.add_parser("reproduce", help="regenerate figure data (CSV + plot script)")
    rp.add_argument("figure", choices=("fig1", "fig2", "fig3"))
    rp.add_argument("--seed", type=int, default=0)
    rp.add_argument("--q-min", type=int, default=2, help="fig1 sweep start")
    rp.add_argument("--q-max", type=int, default=10, help="fig1 sweep end")
    rp.add_argument("--q", type=int, default=6, help="fig2/fig3 pilot length")
    rp.add_argument("--workers", type=int, default=None)
    rp.add_argument("--out", required=True)
    _add_packing_args(rp)

    rpl = sub.add_parser("replay", help="re-run a command from its manifest")
    rpl.add_argument("manifest")
    rpl.add_argument("--out", default=None, help="override the output location")
    return ap


def _params(args) -> dict:
    params = vars(args).copy()
    params.pop("command", None)
    params.pop("codebook_command", None)
    return params


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        if args.command == "replay":
            return cmd_replay(args.manifest, args.out)
        name = "codebook-gen" if args.command == "codebook" else args.command
        return COMMANDS[name](_params(args))
    except (UsageError, codebooks.CodebookFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PilotGainError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

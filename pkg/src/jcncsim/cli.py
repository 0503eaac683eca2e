"""Command-line front end.

Subcommands: ``ber`` (Monte-Carlo sweep), ``thresholds`` (PEXIT table),
``llr-pdf`` (initial-LLR histogram), ``theory`` (analytic BER curve).
Flag values override a ``--config`` JSON file, which overrides defaults.
Exits 0 on success, nonzero with a message on any error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analysis, harness
from .protocode import bundled_code_path

_SCHEMES = ("stbc2", "stbc1", "siso")


def _parse_grid(text: str):
    parts = text.split(":")
    if len(parts) == 1:
        return float(parts[0]), float(parts[0]), 1.0
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be start:stop:step")
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError("grid must satisfy stop >= start, step > 0")
    return start, stop, step


def _parse_m_list(text: str):
    return tuple(float(t) for t in text.split(","))


def _add_common(sub):
    sub.add_argument("--code", help="protograph file (default: bundled AR3A rate-0.8)")
    sub.add_argument("--seed", type=int, help="master seed (default 1)")
    sub.add_argument("--out", help="output CSV path (default stdout)")
    sub.add_argument("--config", help="JSON config file; flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jcncsim", description=__doc__)
    sp = ap.add_subparsers(dest="command", required=True)

    ber = sp.add_parser("ber", help="Monte-Carlo BER sweep")
    _add_common(ber)
    ber.add_argument("--scheme", choices=_SCHEMES)
    ber.add_argument("--m", type=_parse_m_list, help="fading shapes, comma separated")
    ber.add_argument("--ebn0", type=_parse_grid, help="start:stop:step in dB")
    ber.add_argument("--max-blocks", type=int, dest="max_blocks")
    ber.add_argument("--max-errors", type=int, dest="max_errors")
    ber.add_argument("--iters", type=int, dest="iters")
    ber.add_argument("--decoder", choices=("full", "simplified"))
    ber.add_argument("--workers", type=int)
    ber.add_argument("--quasi-static", action="store_true", default=None,
                     dest="quasi_static")
    ber.add_argument("--lift", type=int, dest="lift",
                     help="lift factor (default 100; 800 reproduces the full code)")

    th = sp.add_parser("thresholds", help="PEXIT decoding-threshold table")
    _add_common(th)
    th.add_argument("--scheme", help="comma list (default all three)")
    th.add_argument("--m", type=_parse_m_list)
    th.add_argument("--q-draws", type=int, dest="q_draws")
    th.add_argument("--iters", type=int, dest="iters", help="PEXIT iteration cap")
    th.add_argument("--precision", type=float, dest="precision")
    th.add_argument("--estimator", choices=("gaussian", "llr"))

    pdf = sp.add_parser("llr-pdf", help="initial primary-LLR PDF diagnostics")
    _add_common(pdf)
    pdf.add_argument("--scheme", choices=_SCHEMES)
    pdf.add_argument("--m", type=float)
    pdf.add_argument("--ebn0", type=float)
    pdf.add_argument("--samples", type=int)

    theo = sp.add_parser("theory", help="analytic BER curve")
    _add_common(theo)
    theo.add_argument("--scheme", choices=_SCHEMES)
    theo.add_argument("--m", type=float)
    theo.add_argument("--ebn0", type=_parse_grid)
    theo.add_argument("--iters", type=int, dest="iters")
    theo.add_argument("--q-draws", type=int, dest="q_draws")
    theo.add_argument("--estimator", choices=("gaussian", "llr"))
    return ap


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    """flags > config file > defaults."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        file_cfg = json.loads(Path(args.config).read_text())
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_cfg)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _grid_list(grid):
    start, stop, step = grid
    pts = []
    x = start
    while x <= stop + 1e-9:
        pts.append(round(x, 10))
        x += step
    return pts


def _cmd_ber(args) -> int:
    defaults = dict(code=str(bundled_code_path()), scheme="stbc2", m=(2.0,),
                    ebn0=(0.0, 3.0, 0.5), max_blocks=10_000,
                    max_errors=harness.DEFAULT_MAX_ERRORS, iters=100,
                    decoder="full", seed=1, workers=1, out=None,
                    quasi_static=False, lift=100)
    opt = _merge(args, defaults)
    if isinstance(opt["ebn0"], str):
        opt["ebn0"] = _parse_grid(opt["ebn0"])
    if isinstance(opt["m"], str):
        opt["m"] = _parse_m_list(opt["m"])
    start, stop, step = opt["ebn0"]
    cfg = harness.RunConfig(
        code_path=opt["code"], scheme=opt["scheme"], m_values=tuple(opt["m"]),
        ebn0_start=start, ebn0_stop=stop, ebn0_step=step,
        max_blocks=opt["max_blocks"], max_errors=opt["max_errors"],
        t_max=opt["iters"], decoder=opt["decoder"], seed=opt["seed"],
        workers=opt["workers"], out=opt["out"], quasi_static=opt["quasi_static"],
        lift_factor=opt["lift"],
    )
    records = harness.run_ber_sweep(cfg)
    _emit(harness.ber_records_csv(records, cfg), opt["out"])
    return 0


def _cmd_thresholds(args) -> int:
    defaults = dict(code=str(bundled_code_path()), scheme="stbc2,stbc1,siso",
                    m=(1.0, 2.0, 3.0), q_draws=10_000, iters=1000,
                    precision=0.01, seed=1, out=None,
                    estimator=analysis.DEFAULT_THRESHOLD_ESTIMATOR)
    opt = _merge(args, defaults)
    if isinstance(opt["m"], str):
        opt["m"] = _parse_m_list(opt["m"])
    schemes = [s.strip() for s in opt["scheme"].split(",")]
    for s in schemes:
        if s not in _SCHEMES:
            raise ValueError(f"unknown scheme {s!r}")
    records = harness.run_threshold_table(
        opt["code"], schemes, opt["m"], seed=opt["seed"], q_draws=opt["q_draws"],
        t_max_p=opt["iters"], precision_db=opt["precision"],
        estimator=opt["estimator"])
    meta = {k: opt[k] for k in ("code", "scheme", "m", "q_draws", "iters",
                                "precision", "seed", "estimator")}
    _emit(harness.threshold_table_csv(records, meta), opt["out"])
    return 0


def _cmd_llr_pdf(args) -> int:
    defaults = dict(code=str(bundled_code_path()), scheme="stbc2", m=2.0,
                    ebn0=1.0, samples=1_000_000, seed=1, out=None)
    opt = _merge(args, defaults)
    result = harness.run_llr_pdf(opt["code"], opt["scheme"], opt["m"], opt["ebn0"],
                                 samples=opt["samples"], seed=opt["seed"])
    meta = {k: opt[k] for k in ("code", "scheme", "m", "ebn0", "samples", "seed")}
    _emit(harness.llr_pdf_csv(result, meta), opt["out"])
    return 0


def _cmd_theory(args) -> int:
    defaults = dict(code=str(bundled_code_path()), scheme="stbc2", m=2.0,
                    ebn0=(0.0, 3.0, 0.25), iters=100, q_draws=10_000, seed=1,
                    out=None, estimator=analysis.DEFAULT_THRESHOLD_ESTIMATOR)
    opt = _merge(args, defaults)
    if isinstance(opt["ebn0"], str):
        opt["ebn0"] = _parse_grid(opt["ebn0"])
    rows = harness.run_theoretical_curve(
        opt["code"], opt["scheme"], opt["m"], _grid_list(opt["ebn0"]),
        t_max=opt["iters"], q_draws=opt["q_draws"], seed=opt["seed"],
        estimator=opt["estimator"])
    meta = {k: opt[k] for k in ("code", "scheme", "m", "ebn0", "iters",
                                "q_draws", "seed", "estimator")}
    _emit(harness.theory_curve_csv(rows, meta), opt["out"])
    return 0


_COMMANDS = {
    "ber": _cmd_ber,
    "thresholds": _cmd_thresholds,
    "llr-pdf": _cmd_llr_pdf,
    "theory": _cmd_theory,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands ``cc``, ``belief``, ``fiducial``, ``validate`` and ``oracle``
share one :class:`RunConfig`.  Flags fill it in, ``--config`` JSON
overrides them (except explicit output paths), and every JSON output
echoes the resolved config so a run can be repeated with
``--config <sidecar>``.

Exit codes: 0 success, 1 failed verdict, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction

import numpy as np

from . import confcurve, engine, fiducial, model as models, randomset, validate
from .sets import FiniteSet, IntervalSet, format_set, parse_set

SIM_COMMANDS = {"fiducial", "validate"}
OUTPUT_KEYS = ("out_csv", "out_json")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = ""
    model: str = "normal-location"
    data: list = field(default_factory=list)
    randomset: str = "two-sided"
    gamma_table: str | None = None
    assertions: list = field(default_factory=list)
    levels: list = field(default_factory=list)
    window: list | None = None
    grid_n: int = confcurve.DEFAULT_GRID
    functional: str | None = None
    recalibrate: bool = False
    method: str = "auto"
    n_mc: int = 10**4
    n: int = 10**4
    n_rep: int = 10**4
    alphas: list | None = None
    theta0: float | None = None
    check: str = "cc-coverage"
    tolerance: float | None = None
    seed: int | None = None
    workers: int = 1
    epsilon: float = 0.0
    norm: str = "l2"
    tie_rule: str = "leftmost"
    randomsets: list | None = None
    out_csv: str | None = None
    out_json: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.9g}"


def _jsonable(v):
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (FiniteSet, IntervalSet)):
        return format_set(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _write_json(path: str | None, payload: dict, cfg: RunConfig):
    payload = {**payload, "config": cfg.to_dict()}
    text = json.dumps(_jsonable(payload), indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def _write_csv(path: str | None, header: list, rows, comments: dict | None = None):
    if not path:
        return
    with open(path, "w", newline="") as fh:
        for k, v in (comments or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


# config resolution


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="imfid", description="Inferential models, fiducial "
                                "sampling and confidence curves.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sim=False):
        sp.add_argument("--config", help="JSON config (or an output sidecar) overriding flags")
        sp.add_argument("--model", default=None)
        sp.add_argument("--data", nargs="+", type=float, default=None)
        sp.add_argument("--randomset", default=None)
        sp.add_argument("--gamma-table", default=None, help="CSV of (u, gamma) pairs")
        sp.add_argument("--seed", type=int, default=None,
                        help="required" if sim else "required for Monte Carlo methods")
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--out-json", default=None)

    cc = sub.add_parser("cc", help="confidence curve and level sets")
    common(cc)
    cc.add_argument("--window", nargs=2, type=float, default=None)
    cc.add_argument("--grid-n", type=int, default=None)
    cc.add_argument("--levels", nargs="*", type=float, default=None)
    cc.add_argument("--functional", choices=["mux", "muy", "ratio"], default=None)
    cc.add_argument("--recalibrate", action="store_true", default=None)
    cc.add_argument("--n", type=int, default=None, help="fiducial draws for recalibration")
    cc.add_argument("--out-csv", default=None)

    bel = sub.add_parser("belief", help="belief and plausibility of assertions")
    common(bel)
    bel.add_argument("--assertion", dest="assertions", action="append", default=None)
    bel.add_argument("--method", choices=["auto", "exact", "monte-carlo"], default=None)
    bel.add_argument("--n-mc", type=int, default=None)

    fid = sub.add_parser("fiducial", help="generalized fiducial draws")
    common(fid, sim=True)
    fid.add_argument("--n", type=int, default=None)
    fid.add_argument("--epsilon", type=float, default=None)
    fid.add_argument("--norm", choices=["l2", "linf"], default=None)
    fid.add_argument("--tie-rule", choices=["leftmost", "rightmost"], default=None)
    fid.add_argument("--window", nargs=2, type=float, default=None)
    fid.add_argument("--assertion", dest="assertions", action="append", default=None)
    fid.add_argument("--out-csv", default=None)

    val = sub.add_parser("validate", help="coverage and validity checks")
    common(val, sim=True)
    val.add_argument("--check", choices=["cc-coverage", "belief-validity", "validity-condition"],
                     default=None)
    val.add_argument("--theta0", type=float, default=None)
    val.add_argument("--assertion", dest="assertions", action="append", default=None)
    val.add_argument("--n-rep", type=int, default=None)
    val.add_argument("--n-mc", type=int, default=None)
    val.add_argument("--alphas", nargs="+", type=float, default=None)
    val.add_argument("--tolerance", type=float, default=None)

    orc = sub.add_parser("oracle", help="exact enumeration oracle and theorem checks")
    common(orc)
    orc.add_argument("--randomsets", nargs="+", default=None)
    orc.add_argument("--window", nargs="+", type=int, default=None)
    return p


def resolve_config(argv) -> RunConfig:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        raise UsageError(str(exc)) from None
    cfg = RunConfig(command=args.command)
    names = {f.name for f in fields(RunConfig)}
    for k, v in vars(args).items():
        if k in names and v is not None and k != "command":
            setattr(cfg, k, v)
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        doc = doc.get("config", doc)
        unknown = set(doc) - names
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        for k, v in doc.items():
            if k != "command":
                setattr(cfg, k, v)
        # output destinations are not analysis settings: explicit flags win
        for k in OUTPUT_KEYS:
            if getattr(args, k, None) is not None:
                setattr(cfg, k, getattr(args, k))
    if cfg.command in SIM_COMMANDS and cfg.seed is None:
        raise UsageError(f"--seed is required for '{cfg.command}'")
    return cfg


# helpers


def _model(cfg: RunConfig):
    try:
        m = models.get_model(cfg.model)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return m


def _observation(cfg: RunConfig, m):
    if m.param_dim == 2:
        if len(cfg.data) != 2:
            raise UsageError("two-normal needs --data x y")
        return tuple(cfg.data)
    if len(cfg.data) != 1:
        raise UsageError("--data takes one value for this model")
    y = cfg.data[0]
    if m.aux.discrete:
        if y != int(y):
            raise UsageError("discrete models need integer data")
        return int(y)
    return float(y)


def _family(cfg: RunConfig):
    if cfg.gamma_table:
        try:
            return randomset.read_gamma_csv(cfg.gamma_table)
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc)) from None
    try:
        return randomset.builtin_randomset(cfg.randomset)
    except randomset.UnknownRandomSetError as exc:
        raise UsageError(str(exc)) from None


def _assertion(text: str, m):
    try:
        return parse_set(text)
    except ValueError as exc:
        raise UsageError(f"bad assertion {text!r}: {exc}") from None


def _need_seed(cfg: RunConfig, what: str):
    if cfg.seed is None:
        raise UsageError(f"--seed is required for {what}")


# subcommands


def cmd_cc(cfg: RunConfig) -> tuple[int, str]:
    m = _model(cfg)
    y = _observation(cfg, m)
    if m.param_dim == 2:
        if cfg.functional is None:
            raise UsageError("two-normal needs --functional mux|muy|ratio")
        window = tuple(cfg.window) if cfg.window else (-10.0, 10.0)
        grid = confcurve.default_grid(window, cfg.grid_n)
        if cfg.functional == "ratio":
            cc = confcurve.fieller_cc(y[0], y[1], grid)
        else:
            cc = confcurve.normal_mean_cc(y[0] if cfg.functional == "mux" else y[1], grid)
    else:
        if cfg.functional is not None:
            raise UsageError("--functional applies to two-normal only")
        fam = _family(cfg)
        if m.aux.discrete:
            grid = range(int(cfg.window[0]), int(cfg.window[1]) + 1) if cfg.window else None
        else:
            window = tuple(cfg.window) if cfg.window else _default_window(m, y)
            grid = confcurve.default_grid(window, cfg.grid_n)
        cc = confcurve.cc_from_im(m, y, fam, grid)
        if cfg.recalibrate:
            exact = m.aux.discrete or (m.theta_map is not None and m.window_is_full)
            if not exact:
                _need_seed(cfg, "Monte Carlo recalibration")
            cc = confcurve.recalibrate_exact(cc, m, y, fam, n=cfg.n, seed=cfg.seed)
    sets = {}
    for a in cfg.levels:
        try:
            sets[str(a)] = format_set(confcurve.confidence_set(cc, a))
        except confcurve.GridTooCoarseError as exc:
            sets[str(a)] = f"error: {exc}"
    _write_csv(cfg.out_csv, ["theta", "cc"], cc.rows())
    payload = {"kind": cc.kind, "provenance": cc.provenance, "levels": sets,
               "minimizer": cc.minimizer, "min_value": float(np.min(cc.values))}
    if cc.provenance == "fieller":
        payload["thresholds"] = confcurve.fieller_thresholds(y[0], y[1])
    _write_json(cfg.out_json, payload, cfg)
    summary = f"cc {cc.provenance} ({cc.kind}); " + "; ".join(f"{a}: {s}" for a, s in sets.items())
    return 0, summary


def _default_window(m, y) -> tuple:
    lo, hi = m.window
    if math.isfinite(lo) and math.isfinite(hi):
        return (lo, hi)
    centre = float(m.theta_of_p(y, 0.5))
    lo2, hi2 = centre - 6, centre + 6
    return (max(lo2, lo), hi2 if math.isfinite(hi) is False else min(hi2, hi))


def cmd_belief(cfg: RunConfig) -> tuple[int, str]:
    m = _model(cfg)
    y = _observation(cfg, m)
    fam = _family(cfg)
    if not cfg.assertions:
        raise UsageError("at least one --assertion is required")
    if cfg.method == "monte-carlo":
        _need_seed(cfg, "Monte Carlo belief")
    reports = {}
    for text in cfg.assertions:
        A = _assertion(text, m)
        try:
            r = engine.belief(m, y, fam, A, n_mc=cfg.n_mc, method=cfg.method, seed=cfg.seed,
                              workers=cfg.workers)
        except engine.AllEmptyError as exc:
            raise UsageError(str(exc)) from None
        reports[text] = r.to_dict()
    _write_json(cfg.out_json, {"reports": reports}, cfg)
    summary = "; ".join(f"{k}: bel={v['belief']:.6g} pl={v['plausibility']:.6g}"
                        for k, v in reports.items())
    return 0, summary


def cmd_fiducial(cfg: RunConfig) -> tuple[int, str]:
    m = _model(cfg)
    y = _observation(cfg, m)
    try:
        s = fiducial.sample_gfd(m, y, cfg.n, cfg.epsilon, cfg.seed, cfg.norm, cfg.tie_rule,
                                tuple(cfg.window) if cfg.window else None, workers=cfg.workers)
    except fiducial.AcceptanceTooLowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1, "acceptance too low"
    header = ["theta_x", "theta_y"] if m.param_dim == 2 else ["theta"]
    rows = s.draws.tolist() if m.param_dim == 2 else [[v] for v in s.draws.tolist()]
    _write_csv(cfg.out_csv, header, rows, comments=s.header())
    fids = {}
    for text in cfg.assertions:
        A = _assertion(text, m)
        fids[text] = float(np.mean(A.contains_array(s.draws)))
    _write_json(cfg.out_json, {**s.header(), "fid": fids}, cfg)
    return 0, f"{len(s.draws)} draws, acceptance {s.acceptance_rate:.4g}, tie rule {s.tie_rule}"


def cmd_validate(cfg: RunConfig) -> tuple[int, str]:
    m = _model(cfg)
    fam = _family(cfg)
    alphas = cfg.alphas or list(validate.DEFAULT_ALPHAS)
    if cfg.check == "validity-condition":
        rep = randomset.check_validity_condition(fam, m.aux, n_mc=max(cfg.n_mc, 10**4),
                                                 alphas=alphas, seed=cfg.seed)
        _write_json(cfg.out_json, {"check": cfg.check, "report": rep.to_dict()}, cfg)
        return (0 if rep.passed else 1), f"validity condition: {'pass' if rep.passed else 'FAIL'}"
    if cfg.theta0 is None:
        raise UsageError("--theta0 is required")
    theta0 = int(cfg.theta0) if m.aux.discrete else float(cfg.theta0)
    if cfg.check == "cc-coverage":
        if m.param_dim != 1 or m.aux.discrete:
            raise UsageError("cc-coverage supports scalar continuous models")
        rep = validate.cc_coverage_sim(
            m, theta0, lambda y: confcurve.cc_from_im(m, y, fam, [theta0]),
            n_rep=cfg.n_rep, alphas=alphas, seed=cfg.seed, tolerance=cfg.tolerance,
            workers=cfg.workers)
    else:
        if len(cfg.assertions) != 1:
            raise UsageError("belief-validity needs exactly one --assertion")
        A = _assertion(cfg.assertions[0], m)
        try:
            if m.aux.discrete:
                rep = validate.belief_validity_exact(m, theta0, fam, A, alphas)
            else:
                rep = validate.belief_validity_sim(m, theta0, fam, A, cfg.n_rep, alphas,
                                                   cfg.seed, cfg.tolerance, cfg.workers)
        except validate.ThetaInAssertionError as exc:
            raise UsageError(str(exc)) from None
    _write_json(cfg.out_json, {"check": cfg.check, "report": rep.to_dict()}, cfg)
    status = "pass" if rep.passed else f"FAIL at alpha={rep.failures}"
    return (0 if rep.passed else 1), f"{cfg.check}: {status}"


DEFAULT_ORACLE_FAMILIES = ["two-sided", "left", "right", "offset", "branching"]


def cmd_oracle(cfg: RunConfig) -> tuple[int, str]:
    m = _model(cfg)
    if not m.aux.discrete:
        raise UsageError("oracle needs a discrete model, e.g. discrete-shift:4")
    y = _observation(cfg, m)
    fams = []
    for name in cfg.randomsets or DEFAULT_ORACLE_FAMILIES:
        if name == "branching":
            fams.append(randomset.branching_example(m.aux.n_atoms))
        else:
            try:
                fams.append(randomset.builtin_randomset(name))
            except randomset.UnknownRandomSetError as exc:
                raise UsageError(str(exc)) from None
    try:
        tables = validate.build_oracle(m, y, fams, window=cfg.window)
    except (validate.WindowTooLargeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    rep = validate.check_theorems(m, y, tables)
    _write_json(cfg.out_json, {"tables": [t.to_dict() for t in tables],
                               "theorems": rep.to_dict()}, cfg)
    n_rows = sum(len(t.rows) for t in tables)
    return (0 if rep.passed else 1), \
        f"oracle: {len(tables)} tables, {n_rows} rows, {len(rep.violations)} violations"


COMMANDS = {"cc": cmd_cc, "belief": cmd_belief, "fiducial": cmd_fiducial,
            "validate": cmd_validate, "oracle": cmd_oracle}


def run(argv=None) -> int:
    try:
        cfg = resolve_config(sys.argv[1:] if argv is None else argv)
        code, summary = COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        msg = str(exc)
        if msg and msg not in ("2", "0"):
            print(f"usage error: {msg}", file=sys.stderr)
        return 0 if msg == "0" else 2
    print(summary)
    return code


def main():
    sys.exit(run())

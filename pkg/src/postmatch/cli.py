"""Command line experiment harness (``pm``).

Four commands share one configuration schema:

``simulate``
    Per-trial rows for every (trial, horizon, target) cell plus a summary.
``sweep``
    One aggregate row per (horizon, target) grid cell.
``analyze``
    Threshold and property reports as key-value blocks.
``mismatch``
    Empirical exponent, analytic bound and penalty decomposition for a
    design pair run over a different true channel.

A JSON file given with ``--config`` supplies a nested record; flags given
on the command line override its values.  Unknown keys are rejected.
"""

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy import stats

from . import analysis, channels, mismatch
from .core.errors import ConfigError, NotSeparable, PostMatchError, RateAboveThreshold
from .matching.properties import dmc_property_check, fixed_point_scan
from .matching.upf import Upf
from .simulate import decoders
from .simulate.posterior import posterior_log_density_at_message
from .simulate.session import run_session, session_precision

SCHEMA_VERSION = 1
COMMANDS = ("simulate", "sweep", "analyze", "mismatch")
DECODERS = ("variable", "fixed", "rollback")

TRIAL_COLUMNS = ("trial", "n", "decoder", "target", "lo", "hi", "rate", "hit",
                 "posterior_exponent", "error")
SWEEP_COLUMNS = ("n", "decoder", "target", "trials", "misses", "failed", "p_e", "wilson_lo",
                 "wilson_hi", "mean_rate", "mean_posterior_exponent")
MISMATCH_COLUMNS = ("trial", "n", "posterior_exponent", "error")

# channel kind -> accepted parameters
PAIR_KINDS = {
    "bsc": ("p", "input_p"),
    "bec": ("erasure",),
    "dmc": ("matrix", "input_pmf"),
    "awgn": ("snr", "noise_var"),
    "uniform": (),
    "exponential": (),
    "exp_mean": ("a", "b"),
    "square_law_dmc": (),
}
NOISE_KINDS = {
    "gaussian": ("var",),
    "laplace": ("var",),
    "cauchy": ("scale",),
    "uniform": ("width",),
    "exponential": ("mean",),
}
TRUE_DMC_KINDS = {"bsc": ("p",), "bec": ("erasure",), "dmc": ("matrix",)}

DEFAULTS = {
    "command": None,
    "channel": None,
    "true_channel": None,
    "mu": None,
    "n": None,
    "rate": None,
    "delta": None,
    "decoder": "variable",
    "method": "auto",
    "alpha": 0.5,
    "trials": 1,
    "seed": 0,
    "precision": None,
    "threads": 1,
    "out": None,
    "timing": False,
    "weights": None,
    "shapings": None,
    "analyses": None,
    "margin": 0.1,
    "burn_in": 10_000,
    "chains": 4096,
}
CONFIG_KEYS = frozenset(DEFAULTS)
ANALYSES = ("r_dagger", "r_star", "r_star_separable", "tail_schedule", "properties",
            "fixed_points")


# ---------------------------------------------------------------------------
# configuration


def _as_list(v, name, cast):
    if v is None:
        return None
    items = v if isinstance(v, (list, tuple)) else [v]
    try:
        out = [cast(x) for x in items]
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot parse {v!r}") from None
    if not out:
        raise ConfigError(f"{name}: empty grid")
    return out


def _check_block(block, kinds, name):
    if not isinstance(block, dict) or "kind" not in block:
        raise ConfigError(f"{name}: expected an object with a 'kind' key")
    kind = block["kind"]
    if kind not in kinds:
        raise ConfigError(f"{name}: unknown kind {kind!r} (choose from {', '.join(kinds)})")
    extra = set(block) - {"kind"} - set(kinds[kind])
    if extra:
        raise ConfigError(f"{name}: unknown keys {sorted(extra)} for kind {kind!r}")
    return kind, {k: v for k, v in block.items() if k != "kind"}


def validate_config(cfg):
    """Check and normalize a configuration mapping.

    Returns a new dict with every key present; lists are normalized for
    ``n``, ``rate`` and ``delta``.

    Raises
    ------
    ConfigError
    """
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    c = dict(DEFAULTS)
    c.update({k: v for k, v in cfg.items() if v is not None})
    cmd = c["command"]
    if cmd not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}")
    if c["channel"] is None:
        raise ConfigError("a channel block is required")
    _check_block(c["channel"], PAIR_KINDS, "channel")
    if c["mu"] is not None and not (isinstance(c["mu"], (list, str))):
        raise ConfigError("mu: expected a list of (a, b, c) pieces or a catalog name")
    for key in ("trials", "threads", "seed", "burn_in", "chains"):
        try:
            c[key] = int(c[key])
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected an integer") from None
    if c["trials"] < 1:
        raise ConfigError("trials must be at least 1")
    if c["threads"] < 1:
        raise ConfigError("threads must be at least 1")
    if not 0 <= c["seed"] < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if c["precision"] is not None:
        c["precision"] = int(c["precision"])
        if c["precision"] < 16:
            raise ConfigError("precision must be at least 16 bits")
    c["n"] = _as_list(c["n"], "n", int)
    c["rate"] = _as_list(c["rate"], "rate", float)
    c["delta"] = _as_list(c["delta"], "delta", float)
    if cmd in ("simulate", "sweep", "mismatch"):
        if c["n"] is None:
            raise ConfigError("n is required")
        if any(v < 1 for v in c["n"]):
            raise ConfigError("n must be positive")
        if c["out"] is None:
            raise ConfigError("--out is required")
    if cmd in ("simulate", "sweep"):
        if c["decoder"] not in DECODERS:
            raise ConfigError(f"decoder must be one of {', '.join(DECODERS)}")
        if c["decoder"] == "fixed":
            if c["rate"] is None:
                raise ConfigError("fixed-rate decoding needs rate")
            if any(not r > 0 for r in c["rate"]):
                raise ConfigError("rate must be positive")
        else:
            if c["delta"] is None:
                raise ConfigError(f"{c['decoder']} decoding needs delta")
            if any(not 0 <= d < 1 for d in c["delta"]):
                raise ConfigError("delta must lie in [0, 1)")
            if c["decoder"] == "rollback" and min(c["delta"]) == 0:
                raise ConfigError("rollback decoding needs delta > 0")
        if c["method"] not in ("auto", "exact", "gaussian", "search"):
            raise ConfigError("method must be auto, exact, gaussian or search")
    if cmd == "mismatch":
        if c["true_channel"] is None:
            raise ConfigError("mismatch needs a true_channel block")
        kinds = TRUE_DMC_KINDS if _is_discrete_kind(c["channel"]["kind"]) else NOISE_KINDS
        _check_block(c["true_channel"], kinds, "true_channel")
    if c["analyses"] is not None:
        bad = set(c["analyses"]) - set(ANALYSES)
        if bad:
            raise ConfigError(f"unknown analyses {sorted(bad)}")
    for key, cat in (("weights", analysis.WEIGHTS), ("shapings", analysis.SHAPINGS)):
        if c[key] is not None:
            c[key] = [_rho_entry(e, cat, key) for e in c[key]]
    return c


def _rho_entry(e, catalog, key):
    if isinstance(e, str):
        e = {"name": e}
    if not isinstance(e, dict) or e.get("name") not in catalog:
        raise ConfigError(f"{key}: entries must name one of {', '.join(catalog)}")
    extra = set(e) - {"name", "beta"}
    if extra:
        raise ConfigError(f"{key}: unknown keys {sorted(extra)}")
    return e


def _is_discrete_kind(kind):
    return kind in ("bsc", "bec", "dmc", "square_law_dmc")


def build_pair(block):
    kind, p = _check_block(block, PAIR_KINDS, "channel")
    try:
        if kind == "bsc":
            return channels.bsc(**p)
        if kind == "bec":
            return channels.bec(erasure=p.get("erasure", 0.5))
        if kind == "dmc":
            return channels.dmc(p["matrix"], p.get("input_pmf"))
        if kind == "awgn":
            return channels.awgn(**p)
        if kind == "uniform":
            return channels.uniform_pair()
        if kind == "exponential":
            return channels.exponential_pair()
        if kind == "exp_mean":
            return channels.exp_mean_pair(**p)
        return channels.square_law_dmc()
    except (KeyError, TypeError, ValueError, ArithmeticError) as exc:
        raise ConfigError(f"channel: {exc}") from None


def build_true_channel(block, design):
    if design.channel.discrete:
        kind, p = _check_block(block, TRUE_DMC_KINDS, "true_channel")
        try:
            if kind == "bsc":
                return channels.bsc(**p).channel
            if kind == "bec":
                return channels.bec(erasure=p.get("erasure", 0.5)).channel
            return channels.dmc(p["matrix"]).channel
        except (KeyError, TypeError, ValueError, ArithmeticError) as exc:
            raise ConfigError(f"true_channel: {exc}") from None
    kind, p = _check_block(block, NOISE_KINDS, "true_channel")
    make = {"gaussian": channels.gaussian_noise, "laplace": channels.laplace_noise,
            "cauchy": channels.cauchy_noise, "uniform": channels.uniform_noise,
            "exponential": channels.exponential_noise}[kind]
    try:
        return make(**{k: float(v) for k, v in p.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"true_channel: {exc}") from None


def build_mu(spec):
    if spec is None:
        return None
    if isinstance(spec, str):
        if spec == "identity":
            return Upf.identity()
        if spec == "three_piece_shift":
            return Upf.three_piece_shift()
        raise ConfigError(f"mu: unknown catalog entry {spec!r}")
    try:
        return Upf(spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"mu: {exc}") from None


def _build_rho(entry, catalog):
    make = catalog[entry["name"]]
    return make(float(entry["beta"])) if "beta" in entry else make()


# ---------------------------------------------------------------------------
# trials


_PAIRS = {}


def _cached_pair(block):
    key = json.dumps(block, sort_keys=True)
    if key not in _PAIRS:
        _PAIRS[key] = build_pair(block)
    return _PAIRS[key]


def _fmt(v):
    """Full-precision decimal string."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _targets(cfg):
    return cfg["rate"] if cfg["decoder"] == "fixed" else cfg["delta"]


def _decode(tr, cfg, target, m):
    dec = cfg["decoder"]
    if dec == "fixed":
        return decoders.decode_fixed_rate(tr, target, n_used=m, method=cfg["method"])
    if dec == "rollback":
        return decoders.decode_rollback(tr, target, alpha=cfg["alpha"], n_used=m)
    return decoders.decode_variable_rate(tr, target, n_used=m, method=cfg["method"])


def _error_text(exc):
    return f"{type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")


def run_trial(cfg, trial):
    """All (horizon, target) cells of one trial, as dicts.

    One session of the largest horizon is run on stream ``trial``; smaller
    horizons decode its prefixes.  Errors are recorded in the rows.
    """
    pair = _cached_pair(cfg["channel"])
    mu = build_mu(cfg["mu"])
    ns = sorted(set(cfg["n"]))
    targets = _targets(cfg)
    rows = []
    t0 = time.perf_counter()
    try:
        rt = max([pair.mutual_information] + (cfg["rate"] or []))
        prec = session_precision(pair, ns[-1], rate_target=rt, precision=cfg["precision"])
        tr = run_session(pair, "random", ns[-1], seed=cfg["seed"], stream_id=trial, mu=mu,
                         precision=prec)
    except (PostMatchError, ArithmeticError, ValueError) as exc:
        msg = _error_text(exc)
        return [dict(trial=trial, n=m, decoder=cfg["decoder"], target=t, hit=False, error=msg,
                     elapsed=time.perf_counter() - t0) for m in ns for t in targets]
    logd = [tr.kernel.log2_density_xy(x, y) for x, y in zip(tr.xs, tr.ys)]
    cum = np.cumsum(logd)
    for m in ns:
        expo = float(cum[m - 1]) / m
        expo = expo if math.isfinite(expo) else None
        for t in targets:
            t1 = time.perf_counter()
            row = dict(trial=trial, n=m, decoder=cfg["decoder"], target=t,
                       posterior_exponent=expo)
            try:
                iv = _decode(tr, cfg, t, m)
                row.update(lo=iv.lo.value, hi=iv.hi.value, rate=iv.rate,
                           hit=iv.contains_message)
            except (PostMatchError, ArithmeticError, ValueError) as exc:
                row.update(hit=False, error=_error_text(exc))
            row["elapsed"] = time.perf_counter() - t1
            rows.append(row)
    return rows


def _trial_batch(args):
    cfg, ids = args
    return [r for t in ids for r in run_trial(cfg, t)]


def run_trials(cfg, func=_trial_batch):
    """Fan trials out over ``cfg['threads']`` worker processes.

    Results are sorted by (trial, n, target) so the output does not depend
    on the number of workers.
    """
    ids = list(range(cfg["trials"]))
    k = cfg["threads"]
    if k == 1:
        rows = func((cfg, ids))
    else:
        batches = [ids[i::k] for i in range(k)]
        with ProcessPoolExecutor(max_workers=k) as pool:
            rows = [r for part in pool.map(func, [(cfg, b) for b in batches]) for r in part]
    rows.sort(key=lambda r: (r["trial"], r["n"], r.get("target", 0)))
    return rows


def wilson_interval(misses, trials, level=0.95):
    """Wilson score interval for a binomial proportion."""
    ci = stats.binomtest(int(misses), int(trials)).proportion_ci(level, method="wilson")
    return float(ci.low), float(ci.high)


def aggregate(rows):
    """Group rows by (n, decoder, target); failed trials count as misses."""
    cells = {}
    for r in rows:
        cells.setdefault((r["n"], r["decoder"], r["target"]), []).append(r)
    out = []
    for (n, dec, t), group in sorted(cells.items()):
        ok = [r for r in group if not r.get("error")]
        misses = sum(1 for r in ok if not r["hit"]) + (len(group) - len(ok))
        lo, hi = wilson_interval(misses, len(group))
        rates = [r["rate"] for r in ok]
        expos = [r["posterior_exponent"] for r in group if r.get("posterior_exponent") is not None]
        out.append(dict(n=n, decoder=dec, target=t, trials=len(group), misses=misses,
                        failed=len(group) - len(ok), p_e=misses / len(group), wilson_lo=lo,
                        wilson_hi=hi, mean_rate=float(np.mean(rates)) if rates else math.nan,
                        mean_posterior_exponent=float(np.mean(expos)) if expos else math.nan))
    return out


def write_csv(path, command, columns, rows, cfg, timing=False):
    cols = list(columns) + (["elapsed"] if timing else [])
    meta = {"schema": SCHEMA_VERSION, "command": command, "seed": cfg["seed"],
            "channel": json.dumps(cfg["channel"], sort_keys=True, separators=(",", ":"))}
    lines = ["# " + " ".join(f"{k}={v}" for k, v in meta.items()), ",".join(cols)]
    for r in rows:
        lines.append(",".join(_fmt(r.get(c)) for c in cols))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path):
    """Rows of a CSV written by this module as dicts of strings."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    head = lines[0].split(",")
    return [dict(zip(head, ln.split(","))) for ln in lines[1:]]


def _kv_block(title, items):
    lines = [f"[{title}]"] + [f"{k}: {_fmt(v)}" for k, v in items]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg, stream=None):
    stream = stream or sys.stdout
    rows = run_trials(cfg)
    write_csv(cfg["out"], "simulate", TRIAL_COLUMNS, rows, cfg, timing=cfg["timing"])
    summary = aggregate(rows)
    for cell in summary:
        stream.write(_kv_block("summary", [(k, cell[k]) for k in SWEEP_COLUMNS]))
    return summary


def cmd_sweep(cfg, stream=None):
    stream = stream or sys.stdout
    summary = aggregate(run_trials(cfg))
    write_csv(cfg["out"], "sweep", SWEEP_COLUMNS, summary, cfg)
    stream.write(f"cells: {len(summary)}\n")
    return summary


def _default_analyses(pair):
    if pair.channel.discrete:
        return ("r_dagger", "properties", "fixed_points")
    return ("r_dagger", "r_star", "r_star_separable", "fixed_points")


def cmd_analyze(cfg, stream=None):
    stream = stream or sys.stdout
    pair = build_pair(cfg["channel"])
    todo = cfg["analyses"] or _default_analyses(pair)
    weights = cfg["weights"] or [{"name": "constant"}]
    shapings = cfg["shapings"] or [{"name": "identity"}]
    blocks = []
    head = [("channel", pair.label), ("mutual_information_bits", pair.mutual_information)]
    blocks.append(_kv_block("pair", head))
    star_reports = []
    if "r_dagger" in todo:
        for e in weights:
            rep = analysis.r_dagger(pair, _build_rho(e, analysis.WEIGHTS), seed=cfg["seed"])
            blocks.append("[threshold]\n" + rep.to_text())
    for e in shapings:
        rho = _build_rho(e, analysis.SHAPINGS)
        if "r_star" in todo:
            rep = analysis.r_star(pair, rho)
            star_reports.append((rho, rep))
            blocks.append("[threshold]\n" + rep.to_text())
        if "r_star_separable" in todo:
            try:
                rep = analysis.r_star_separable(pair, rho)
                blocks.append("[threshold]\n" + rep.to_text())
            except NotSeparable as exc:
                blocks.append(_kv_block("threshold", [("kind", "r_star_separable"),
                                                      ("rho", rho.label),
                                                      ("not_separable", str(exc))]))
    if "tail_schedule" in todo:
        for rho, rep in star_reports:
            for r in cfg["rate"] or []:
                for n in cfg["n"] or []:
                    try:
                        ell = analysis.target_error_schedule(r, rep, rho.shaped_law(pair.input),
                                                             n, margin=cfg["margin"])
                        blocks.append(_kv_block("tail_schedule", [
                            ("rho", rho.label), ("rate", r), ("n", n), ("interval_length", ell),
                            ("shortfall_bound", analysis.rate_shortfall_bound(rep, r, n))]))
                    except RateAboveThreshold as exc:
                        blocks.append(_kv_block("tail_schedule", [
                            ("rho", rho.label), ("rate", r), ("n", n), ("error", str(exc))]))
    if "properties" in todo:
        if not pair.channel.discrete:
            raise ConfigError("properties analysis needs a discrete pair")
        prop = dmc_property_check(pair)
        blocks.append(_kv_block("dmc_property_check", [
            ("B1", prop.B1), ("B2", prop.B2), ("B3_heuristic", prop.B3_heuristic),
            ("A3", prop.A3), ("suggested_permutation",
                              ",".join(map(str, prop.suggested_permutation or ()))),
            ("fixed_points", ",".join(repr(float(v)) for v in prop.fixed_points)),
            ("notes", "; ".join(prop.notes))]))
    if "fixed_points" in todo:
        fp = fixed_point_scan(pair, mu=build_mu(cfg["mu"]))
        blocks.append(_kv_block("fixed_point_scan", [
            ("fixed_point_free", fp.fixed_point_free),
            ("fixed_points", ",".join(repr(float(v)) for v in fp.fixed_points)),
            ("probe_grid_size", fp.probe_grid_size), ("tolerance", fp.tolerance)]))
    text = "\n".join(blocks)
    if cfg["out"]:
        with open(cfg["out"], "w", encoding="utf-8") as fh:
            fh.write(text)
    stream.write(text)
    return text


def _mismatch_batch(args):
    cfg, ids = args
    design = _cached_pair(cfg["channel"])
    setup = mismatch.MismatchSetup(design, build_true_channel(cfg["true_channel"], design))
    rows = []
    for t in ids:
        for m in sorted(set(cfg["n"])):
            t0 = time.perf_counter()
            row = dict(trial=t, n=m)
            try:
                tr = mismatch.run_mismatch(setup, "random", m, seed=cfg["seed"], stream_id=t,
                                           precision=cfg["precision"])
                row["posterior_exponent"] = posterior_log_density_at_message(tr)
            except (PostMatchError, ArithmeticError, ValueError) as exc:
                row.update(hit=False, error=_error_text(exc))
            row["elapsed"] = time.perf_counter() - t0
            rows.append(row)
    return rows


def cmd_mismatch(cfg, stream=None):
    stream = stream or sys.stdout
    design = build_pair(cfg["channel"])
    true_ch = build_true_channel(cfg["true_channel"], design)
    setup = mismatch.MismatchSetup(design, true_ch)
    setup.check(seed=cfg["seed"])
    items = [("design", design.label), ("true_channel", true_ch.label)]
    matched = mismatch.same_channel(design.channel, true_ch)
    items.append(("matched_channel", matched))
    induced = mismatch.estimate_induced_input(setup, burn_in=cfg["burn_in"],
                                              chains=cfg["chains"], seed=cfg["seed"])
    setup.induced_input = induced.law
    items += [("induced_power", induced.power), ("empirical_snr", induced.snr),
              ("design_snr", getattr(design, "snr", math.nan)),
              ("ks_statistic", induced.ks_statistic), ("ks_pvalue", induced.ks_pvalue),
              ("burn_in", induced.burn_in), ("chains", induced.chains)]
    if matched:
        # the design kernel preserves its own input law exactly
        setup.induced_input = design.input
    bound = mismatch.mismatch_rate_bound(design, setup)
    items += [("bound_bits", bound.rate), ("information_bits", bound.information),
              ("conditional_divergence_bits", bound.conditional_divergence),
              ("output_divergence_bits", bound.output_divergence),
              ("penalty_bits", bound.penalty), ("cross_rate_bits", bound.cross_rate)]
    rows = run_trials(cfg, func=_mismatch_batch)
    write_csv(cfg["out"], "mismatch", MISMATCH_COLUMNS, rows, cfg, timing=cfg["timing"])
    for m in sorted(set(cfg["n"])):
        vals = [r["posterior_exponent"] for r in rows
                if r["n"] == m and r.get("posterior_exponent") is not None]
        expo = float(np.mean(vals)) if vals else math.nan
        items += [(f"empirical_exponent_n{m}", expo),
                  (f"relative_gap_n{m}", abs(expo - bound.rate) / abs(bound.rate)
                   if bound.rate else math.nan),
                  (f"failed_trials_n{m}", sum(1 for r in rows if r["n"] == m and r.get("error")))]
    text = _kv_block("mismatch", items)
    with open(cfg["out"] + ".report", "w", encoding="utf-8") as fh:
        fh.write(text)
    stream.write(text)
    return dict(items)


# ---------------------------------------------------------------------------
# entry point


def _parser():
    p = argparse.ArgumentParser(prog="pm", description="Posterior matching experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON file with a configuration record")
    p.add_argument("--out", help="output CSV (or report) path")
    p.add_argument("--seed", type=int)
    p.add_argument("--precision", type=int, help="working precision in bits")
    p.add_argument("--threads", type=int, help="worker processes")
    p.add_argument("--channel", choices=sorted(PAIR_KINDS))
    for name in ("p", "snr", "noise-var", "erasure", "a", "b"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--true-channel", choices=sorted(set(NOISE_KINDS) | set(TRUE_DMC_KINDS)))
    p.add_argument("--true-var", type=float)
    p.add_argument("--true-p", type=float)
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--rate", type=float, nargs="+")
    p.add_argument("--delta", type=float, nargs="+")
    p.add_argument("--decoder", choices=DECODERS)
    p.add_argument("--method", choices=("auto", "exact", "gaussian", "search"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--weights", nargs="+", choices=sorted(analysis.WEIGHTS))
    p.add_argument("--shapings", nargs="+", choices=sorted(analysis.SHAPINGS))
    p.add_argument("--analyses", nargs="+", choices=ANALYSES)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--timing", action="store_true", default=None,
                   help="add an elapsed column (breaks byte-identical output)")
    return p


def _merge(args, file_cfg):
    cfg = dict(file_cfg)
    cfg["command"] = args.command
    for key in ("out", "seed", "precision", "threads", "n", "rate", "delta", "decoder", "method",
                "alpha", "trials", "weights", "shapings", "analyses", "burn_in", "chains",
                "timing"):
        v = getattr(args, key)
        if v is not None:
            cfg[key] = v
    params = {"p": args.p, "snr": args.snr, "noise_var": args.noise_var,
              "erasure": args.erasure, "a": args.a, "b": args.b}
    if args.channel is not None:
        old = cfg.get("channel") if isinstance(cfg.get("channel"), dict) else {}
        block = {"kind": args.channel}
        if old.get("kind") == args.channel:
            block.update(old)
        cfg["channel"] = block
    block = cfg.get("channel")
    for k, v in params.items():
        if v is not None:
            if not isinstance(block, dict):
                raise ConfigError(f"--{k.replace('_', '-')} needs a channel")
            if k not in PAIR_KINDS.get(block.get("kind"), ()):
                raise ConfigError(f"--{k.replace('_', '-')} does not apply to {block.get('kind')}")
            block[k] = v
    if args.true_channel is not None:
        tc = {"kind": args.true_channel}
        if args.true_var is not None:
            tc["var"] = args.true_var
        if args.true_p is not None:
            tc["p"] = args.true_p
        cfg["true_channel"] = tc
    return cfg


def main(argv=None):
    """Run ``pm``; returns the exit code (0, 2 config error, 3 runtime error)."""
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        file_cfg = {}
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    file_cfg = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            if not isinstance(file_cfg, dict):
                raise ConfigError("config file must hold an object")
            file_cfg.pop("command", None)
        cfg = validate_config(_merge(args, file_cfg))
        build_pair(cfg["channel"])
        build_mu(cfg["mu"])
    except ConfigError as exc:
        print(f"pm: config error: {exc}", file=sys.stderr)
        return 2
    run = {"simulate": cmd_simulate, "sweep": cmd_sweep, "analyze": cmd_analyze,
           "mismatch": cmd_mismatch}[cfg["command"]]
    try:
        run(cfg)
    except ConfigError as exc:
        print(f"pm: config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"pm: runtime error: {_error_text(exc)}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

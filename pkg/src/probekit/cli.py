"""Command-line entry point.

Every subcommand reads an optional JSON config (``--config``), applies flag
overrides, validates, runs, and writes results into ``--out``:

* result files (CSV and JSON) that depend only on the validated config;
* ``manifest.json`` with the config echo, library versions and wall time.

Exit codes: 0 success, 2 invalid input, 3 numerical accuracy, 4 near an
interior eigenvalue.  ``PROBEKIT_THREADS`` bounds the worker threads used
for independent work items.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .errors import (
    AccuracyError,
    DomainError,
    NearEigenvalueError,
    PreconditionError,
    ProbekitError,
    ResolutionError,
    TailToleranceError,
    ValidationError,
)

__all__ = ["RunConfig", "run", "main", "SUBCOMMANDS", "DEFAULTS", "EXIT_CODES", "thread_count"]

THREADS_ENV = "PROBEKIT_THREADS"

EXIT_CODES = {"ok": 0, "validation": 2, "accuracy": 3, "eigenvalue": 4}

DEFAULTS = {
    "identities": {"max_order": 40, "alt_max_order": 20},
    "asymptotics": {
        "indices": [1, 2, 3, 4],
        "j_list": [16, 32, 64, 128, 256, 512, 1024, 2048, 4096],
        "quad_tol": 1e-8,
        # relative slope tolerance per pair (I_{2m-1}, I_{2m}); the last entry covers higher m
        "slope_tol": [0.03, 0.05],
        "probe": True,
    },
    "forward": {"q": 0.0, "obstacle": None, "max_degree": 64},
    "expansion": {
        "mode": "remainder",
        "q": 1.0,
        "q2": 0.0,
        "obstacle": None,
        "schedule": {"delta": 0.25, "j_list": [2, 4, 8, 16, 32, 64]},
        "m_max": 1,
        "s_list": None,
        "m0": 0,
        "extra_norms": False,
    },
    "probe": {
        "q1": 0.0,
        "q2": 0.0,
        "obstacle1": None,
        "obstacle2": None,
        "schedule": {},
        "orders": [0, 1, 2],
    },
    "recover": {
        "q1": 0.0,
        "q2": 0.0,
        "obstacle1": None,
        "obstacle2": None,
        "schedule": {},
        "depth": 2,
    },
}

SUBCOMMANDS = tuple(DEFAULTS)

LIMITS = {
    "max_order": 200,
    "max_degree": 20000,
    "j": 10**6,
    "m_max": 6,
    "depth": 4,
    "order": 8,
}


def thread_count():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(THREADS_ENV, f"expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValidationError(THREADS_ENV, "must be at least 1")
    return n


def _pmap(fn, items):
    items = list(items)
    n = min(thread_count(), max(1, len(items)))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- validation


def _int(block, key, path, lo, hi):
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, int) or not lo <= v <= hi:
        raise ValidationError(f"{path}.{key}", f"must be an integer in [{lo}, {hi}], got {v!r}")
    return v


def _tol(block, key, path, hi=1e-2):
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not (0 < v <= hi):
        raise ValidationError(f"{path}.{key}", f"must be a positive tolerance <= {hi:g}, got {v!r}")
    return float(v)


def _int_list(block, key, path, lo, hi, increasing=True, min_len=1):
    v = block[key]
    if not isinstance(v, list) or len(v) < min_len:
        raise ValidationError(f"{path}.{key}", f"must be a list of at least {min_len} integers")
    for x in v:
        if isinstance(x, bool) or not isinstance(x, int) or not lo <= x <= hi:
            raise ValidationError(f"{path}.{key}", f"entries must be integers in [{lo}, {hi}], got {x!r}")
    if increasing and any(b <= a for a, b in zip(v, v[1:])):
        raise ValidationError(f"{path}.{key}", "entries must be strictly increasing")
    return v


def _profile(block, key, path):
    from .radial import RadialProfile

    return RadialProfile.from_config(block[key], path=f"{path}.{key}").to_config()


def _obstacle(block, key, path):
    from .forward import ObstacleSpec

    try:
        ob = ObstacleSpec.from_config(block[key])
    except ValidationError as exc:
        raise ValidationError(exc.field.replace("obstacle", f"{path}.{key}", 1),
                              str(exc).split(": ", 1)[-1]) from None
    return ob.to_config() if ob.present else None


def _schedule(block, key, path):
    from .schedule import ProbeSchedule

    spec = block[key]
    if spec is None:
        spec = {}
    try:
        sch = ProbeSchedule.from_config(spec)
    except ValidationError as exc:
        raise ValidationError(exc.field.replace("schedule", f"{path}.{key}", 1),
                              str(exc).split(": ", 1)[-1]) from None
    if max(sch.j_list) > LIMITS["j"]:
        raise ValidationError(f"{path}.{key}.j_list", f"entries must not exceed {LIMITS['j']}")
    if sch.max_degree > LIMITS["max_degree"]:
        raise ValidationError(
            f"{path}.{key}", f"closest probe needs degree {sch.max_degree} > {LIMITS['max_degree']}"
        )
    return sch.to_config()


def _validate_block(name, block):
    p = name
    unknown = set(block) - set(DEFAULTS[name])
    if unknown:
        raise ValidationError(f"{p}.{sorted(unknown)[0]}", "unknown key")
    out = dict(block)
    if name == "identities":
        _int(out, "max_order", p, 1, LIMITS["max_order"])
        _int(out, "alt_max_order", p, 1, LIMITS["max_order"])
    elif name == "asymptotics":
        _int_list(out, "indices", p, 1, LIMITS["order"])
        _int_list(out, "j_list", p, 2, LIMITS["j"], min_len=4)
        out["quad_tol"] = _tol(out, "quad_tol", p)
        st = out["slope_tol"]
        if not (isinstance(st, list) and st and all(
                isinstance(t, (int, float)) and not isinstance(t, bool) and 0 < t <= 1 for t in st)):
            raise ValidationError(f"{p}.slope_tol", "must be a non-empty list of tolerances in (0, 1]")
        out["slope_tol"] = [float(t) for t in st]
        if not isinstance(out["probe"], bool):
            raise ValidationError(f"{p}.probe", "must be true or false")
    elif name == "forward":
        out["q"] = _profile(out, "q", p)
        out["obstacle"] = _obstacle(out, "obstacle", p)
        _int(out, "max_degree", p, 0, LIMITS["max_degree"])
    elif name == "expansion":
        if out["mode"] not in ("remainder", "difference"):
            raise ValidationError(f"{p}.mode", "must be 'remainder' or 'difference'")
        out["q"] = _profile(out, "q", p)
        out["q2"] = _profile(out, "q2", p)
        out["obstacle"] = _obstacle(out, "obstacle", p)
        out["schedule"] = _schedule(out, "schedule", p)
        _int(out, "m_max", p, 0, LIMITS["m_max"])
        _int(out, "m0", p, 0, LIMITS["m_max"])
        s = out["s_list"]
        if s is not None:
            if not isinstance(s, list) or not s or any(
                isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x) for x in s
            ):
                raise ValidationError(f"{p}.s_list", "must be null or a non-empty list of numbers")
            out["s_list"] = [float(x) for x in s]
        if not isinstance(out["extra_norms"], bool):
            raise ValidationError(f"{p}.extra_norms", "must be true or false")
    elif name in ("probe", "recover"):
        out["q1"] = _profile(out, "q1", p)
        out["q2"] = _profile(out, "q2", p)
        out["obstacle1"] = _obstacle(out, "obstacle1", p)
        out["obstacle2"] = _obstacle(out, "obstacle2", p)
        out["schedule"] = _schedule(out, "schedule", p)
        if len(out["schedule"]["j_list"]) < 4:
            raise ValidationError(f"{p}.schedule.j_list", "slope fits need at least four probes")
        if name == "probe":
            _int_list(out, "orders", p, 0, LIMITS["order"])
        else:
            _int(out, "depth", p, 0, LIMITS["depth"])
    return out


@dataclass
class RunConfig:
    """Validated parameters of one run."""

    subcommand: str
    params: dict = field(default_factory=dict)
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, data, subcommand=None):
        if not isinstance(data, dict):
            raise ValidationError("config", "expected a JSON object")
        data = copy.deepcopy(data)
        sub = subcommand or data.get("subcommand")
        if sub not in DEFAULTS:
            raise ValidationError("subcommand", f"must be one of {', '.join(SUBCOMMANDS)}")
        unknown = set(data) - {"subcommand", "output_dir", *SUBCOMMANDS}
        if unknown:
            raise ValidationError(sorted(unknown)[0], "unknown key")
        out_dir = data.get("output_dir", "out")
        if not isinstance(out_dir, str) or not out_dir:
            raise ValidationError("output_dir", "must be a non-empty path")
        block = data.get(sub, {})
        if block is None:
            block = {}
        if not isinstance(block, dict):
            raise ValidationError(sub, "expected an object")
        params = copy.deepcopy(DEFAULTS[sub])
        params.update(block)
        return cls(sub, _validate_block(sub, params), out_dir)

    def to_dict(self):
        return {"subcommand": self.subcommand, "output_dir": self.output_dir, self.subcommand: self.params}


# ------------------------------------------------------------------ writers


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(v) for v in r])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _versions():
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {
        "artifact": own,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


# --------------------------------------------------------------- subcommands


def _cmd_identities(p, out: Path):
    from .kernel_algebra import (
        alt_sum_identity,
        identities_2_9_2_10,
        recurrence_agreement,
        recurrence_families,
    )

    routes = {m: a and b for m, a, b in recurrence_agreement(p["max_order"])}

    def row(m):
        rep = identities_2_9_2_10(m)
        h29, h210 = rep.holds
        fam = recurrence_families(m)
        alt = all(alt_sum_identity(m, i) for i in range(m + 1)) if m <= p["alt_max_order"] else ""
        return [m, str(rep.lhs_29), str(rep.rhs_29), h29, str(rep.lhs_210), str(rep.rhs_210), h210,
                routes[m], all(fam.values()), alt]

    rows = [row(m) for m in range(1, p["max_order"] + 1)]
    write_csv(
        out / "identities.csv",
        ["m", "lhs_29", "rhs_29", "holds_29", "lhs_210", "rhs_210", "holds_210",
         "construction_routes_agree", "coefficient_recurrences_hold", "alt_sum_holds"],
        rows,
    )
    ok = all(r[3] and r[6] and r[7] and r[8] and r[9] in (True, "") for r in rows)
    write_json(out / "identities_summary.json", {"orders": len(rows), "all_hold": ok})
    return {"all_hold": ok}


def _cmd_asymptotics(p, out: Path):
    from .model_integrals import (
        ModelDomainSpec,
        eval_I_with_error,
        fit_log_slope,
        printed_lower_bound,
        probe_integral,
        theory_slope,
    )

    spec = ModelDomainSpec(tuple(p["j_list"]), p["quad_tol"])
    items = [(k, j) for k in p["indices"] for j in spec.j_list]
    res = _pmap(lambda kj: eval_I_with_error(kj[0], kj[1], spec), items)
    rows = [[k, j, r.value, r.error] for (k, j), r in zip(items, res)]
    write_csv(out / "asymptotics.csv", ["index", "j", "value", "error_estimate"], rows)
    summary = {"integrals": [], "probe": None}
    for k in p["indices"]:
        fit = fit_log_slope([(j, v) for kk, j, v, _ in rows if kk == k])
        th = theory_slope(k)
        rel = abs(fit.slope - th) / abs(th)
        tol = p["slope_tol"][min((k + 1) // 2, len(p["slope_tol"])) - 1]
        summary["integrals"].append({
            "index": k,
            "slope": fit.slope,
            "intercept": fit.intercept,
            "residual_max": fit.residual_max,
            "theory_slope": th,
            "relative_error": rel,
            "tolerance": tol,
            "within_tolerance": rel <= tol,
        })
    if p["probe"]:
        pres = _pmap(lambda j: probe_integral(j, spec.quad_tol), spec.j_list)
        prow = [[j, r.value, r.error, printed_lower_bound(j), r.value >= printed_lower_bound(j)]
                for j, r in zip(spec.j_list, pres)]
        write_csv(out / "probe_integral.csv", ["j", "value", "error_estimate", "lower_bound", "holds"], prow)
        fit = fit_log_slope([(r[0], r[1]) for r in prow])
        summary["probe"] = {
            "slope": fit.slope,
            "slope_over_pi": fit.slope / math.pi,
            "bound_holds_everywhere": all(r[4] for r in prow),
        }
    write_json(out / "asymptotics_summary.json", summary)
    return summary


def _cmd_forward(p, out: Path):
    from .forward import ObstacleSpec, assemble_dtn
    from .radial import RadialProfile

    dtn = assemble_dtn(RadialProfile.from_config(p["q"]), ObstacleSpec.from_config(p["obstacle"]),
                       p["max_degree"])
    lam = dtn.multipliers
    write_csv(out / "forward.csv", ["n", "lambda_re", "lambda_im"],
              [[n, float(v.real), float(v.imag)] for n, v in enumerate(lam)])
    summary = {"max_degree": p["max_degree"], "lambda_0": complex(lam[0])}
    write_json(out / "forward_summary.json", summary)
    return summary


def _cmd_expansion(p, out: Path):
    from .expansion import difference_boundedness, remainder_norms, summarize_slopes
    from .forward import ObstacleSpec
    from .schedule import ProbeSchedule

    sch = ProbeSchedule.from_config(p["schedule"])
    if p["mode"] == "remainder":
        rows = remainder_norms(p["q"], ObstacleSpec.from_config(p["obstacle"]), sch, p["m_max"],
                               p["s_list"], extra_norms=p["extra_norms"])
    else:
        rows = difference_boundedness(p["q"], p["q2"], sch, p["m0"])
    write_csv(out / "expansion_norms.csv", ["j", "m", "norm", "value"],
              [[r.j, r.m, r.norm_name, r.value] for r in rows])
    slopes = summarize_slopes(rows)
    write_csv(
        out / "expansion_slopes.csv",
        ["m", "norm", "slope", "intercept", "normalized_slope", "increment_ratio", "residual", "verdict"],
        [[s.m, s.norm_name, s.slope, s.intercept, s.normalized_slope, s.increment_ratio, s.residual,
          s.verdict] for s in slopes],
    )
    summary = {"mode": p["mode"], "all_bounded": all(s.verdict == "bounded" for s in slopes)}
    write_json(out / "expansion_summary.json", summary)
    return summary


def _dtn_pair(p):
    from .forward import ObstacleSpec, assemble_dtn
    from .radial import RadialProfile
    from .schedule import ProbeSchedule

    sch = ProbeSchedule.from_config(p["schedule"])
    N = sch.max_degree
    d1 = assemble_dtn(RadialProfile.from_config(p["q1"]), ObstacleSpec.from_config(p["obstacle1"]), N)
    d2 = assemble_dtn(RadialProfile.from_config(p["q2"]), ObstacleSpec.from_config(p["obstacle2"]), N)
    return sch, d1, d2


def _cmd_probe(p, out: Path):
    from .model_integrals import fit_log_slope
    from .probe import diagnostic_functionals, probe_data

    sch, d1, d2 = _dtn_pair(p)
    p1, p2 = probe_data(d1, sch), probe_data(d2, sch)
    rows, fits = [], []
    for k in p["orders"]:
        vals = diagnostic_functionals(p1, p2, sch, k)
        rows += [[k, j, v.real, v.imag] for j, v in vals]
        fit = fit_log_slope(vals)
        fits.append({"order": k, "slope": complex(fit.slope), "intercept": complex(fit.intercept),
                     "residual_max": fit.residual_max})
    write_csv(out / "probe.csv", ["order", "j", "value_re", "value_im"], rows)
    summary = {"degree_cap": sch.max_degree, "fits": fits}
    write_json(out / "probe_summary.json", summary)
    return summary


def _cmd_recover(p, out: Path):
    from .probe import recover_boundary_value

    sch, d1, d2 = _dtn_pair(p)
    rep = recover_boundary_value(d1, d2, sch, p["depth"])
    write_csv(
        out / "recover.csv",
        ["order", "diagnostic", "slope_re", "slope_im", "threshold", "residual", "verdict"],
        [[r.order, r.diagnostic, complex(r.slope).real, complex(r.slope).imag, r.threshold, r.residual,
          r.verdict] for r in rep.rows],
    )
    report = rep.to_dict()
    report["first_divergent_order"] = rep.first_divergent_order
    write_json(out / "recover_report.json", report)
    return {"first_divergent_order": rep.first_divergent_order, "estimated_q_gap": rep.estimated_q_gap}


COMMANDS = {
    "identities": _cmd_identities,
    "asymptotics": _cmd_asymptotics,
    "forward": _cmd_forward,
    "expansion": _cmd_expansion,
    "probe": _cmd_probe,
    "recover": _cmd_recover,
}


def run(config: RunConfig):
    """Execute a validated run; returns ``(summary, manifest)``."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    summary = COMMANDS[config.subcommand](config.params, out)
    manifest = {
        "config": config.to_dict(),
        "versions": _versions(),
        "threads": thread_count(),
        "wall_time_s": time.perf_counter() - t0,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    write_json(out / "manifest.json", manifest)
    return summary, manifest


# ------------------------------------------------------------------- parsing


def parse_j_range(text):
    """``"16..4096"`` (doubling) or ``"2,4,8"``."""
    text = text.strip()
    try:
        if ".." in text:
            a, b = (int(x) for x in text.split(".."))
            if a < 1 or b < a:
                raise ValueError
            out = []
            while a <= b:
                out.append(a)
                a *= 2
            return out
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValidationError("j_list", f"cannot parse {text!r}; use A..B or a comma list") from None


def _int_csv(text, path):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValidationError(path, f"cannot parse {text!r} as integers") from None


def _json_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_path(block, dotted, value, root):
    keys = dotted.split(".")
    cur = block
    for k in keys[:-1]:
        nxt = cur.get(k)
        if nxt is None:
            nxt = {}
            cur[k] = nxt
        if not isinstance(nxt, dict):
            raise ValidationError(f"{root}.{dotted}", "cannot set a key inside a non-object")
        cur = nxt
    cur[keys[-1]] = value


def build_parser():
    ap = argparse.ArgumentParser(prog="probekit", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", help="output directory (default: out)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a block entry; VALUE is parsed as JSON when possible")

    sp = sub.add_parser("identities", help="exact coefficient identities and recurrences")
    common(sp)
    sp.add_argument("--max-order", type=int)
    sp.add_argument("--alt-max-order", type=int)

    sp = sub.add_parser("asymptotics", help="model-integral slopes in ln j")
    common(sp)
    sp.add_argument("--m", help="comma list of integral indices")
    sp.add_argument("--j", help="j values: A..B (doubling) or comma list")
    sp.add_argument("--quad-tol", type=float)
    sp.add_argument("--no-probe", action="store_true", help="skip the probe integral")

    def qflag(sp, name="--q"):
        sp.add_argument(name, type=_json_value, help="profile: number or JSON object")

    def obstacle(sp, suffix=""):
        sp.add_argument(f"--rho{suffix}", type=float)
        sp.add_argument(f"--bc{suffix}", choices=["dirichlet", "robin"])
        sp.add_argument(f"--gamma{suffix}", type=float)

    sp = sub.add_parser("forward", help="DtN multipliers")
    common(sp)
    qflag(sp)
    obstacle(sp)
    sp.add_argument("--max-degree", type=int)

    sp = sub.add_parser("expansion", help="singularity-expansion remainder tables")
    common(sp)
    sp.add_argument("--mode", choices=["remainder", "difference"])
    qflag(sp)
    qflag(sp, "--q2")
    obstacle(sp)
    sp.add_argument("--m-max", type=int)
    sp.add_argument("--m0", type=int)
    sp.add_argument("--j", help="probe indices: A..B or comma list")
    sp.add_argument("--delta", type=float)

    for name, helptext in (("probe", "windowed Cauchy-difference diagnostics"),
                           ("recover", "boundary determination verdicts")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        qflag(sp, "--q1")
        qflag(sp, "--q2")
        obstacle(sp, "1")
        obstacle(sp, "2")
        sp.add_argument("--j", help="probe indices: A..B or comma list")
        sp.add_argument("--delta", type=float)
        if name == "probe":
            sp.add_argument("--orders", help="comma list of diagnostic orders")
        else:
            sp.add_argument("--depth", type=int)
    return ap


def _obstacle_override(block, key, args, suffix):
    rho, bc, gamma = (getattr(args, f"{a}{suffix}", None) for a in ("rho", "bc", "gamma"))
    if rho is None and bc is None and gamma is None:
        return
    ob = dict(block.get(key) or {})
    if rho is not None:
        ob["rho"] = rho
    if bc is not None:
        ob["bc"] = bc
    if gamma is not None:
        ob["gamma"] = gamma
    block[key] = ob


def config_from_args(args) -> RunConfig:
    sub = args.subcommand
    data = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ValidationError("config", f"cannot read {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError("config", f"invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ValidationError("config", "expected a JSON object")
    if data.get("subcommand", sub) != sub:
        raise ValidationError("subcommand", f"config is for {data['subcommand']!r}, not {sub!r}")
    block = data.get(sub) or {}
    if not isinstance(block, dict):
        raise ValidationError(sub, "expected an object")
    block = dict(block)
    v = vars(args)

    def put(key, value):
        if value is not None:
            block[key] = value

    if sub == "identities":
        put("max_order", v.get("max_order"))
        put("alt_max_order", v.get("alt_max_order"))
    elif sub == "asymptotics":
        if args.m:
            block["indices"] = _int_csv(args.m, "asymptotics.indices")
        if args.j:
            block["j_list"] = parse_j_range(args.j)
        put("quad_tol", args.quad_tol)
        if args.no_probe:
            block["probe"] = False
    elif sub == "forward":
        put("q", args.q)
        put("max_degree", args.max_degree)
        _obstacle_override(block, "obstacle", args, "")
    elif sub == "expansion":
        put("mode", args.mode)
        put("q", args.q)
        put("q2", args.q2)
        put("m_max", args.m_max)
        put("m0", args.m0)
        _obstacle_override(block, "obstacle", args, "")
    else:
        put("q1", args.q1)
        put("q2", args.q2)
        _obstacle_override(block, "obstacle1", args, "1")
        _obstacle_override(block, "obstacle2", args, "2")
        if sub == "probe" and args.orders:
            block["orders"] = _int_csv(args.orders, "probe.orders")
        if sub == "recover":
            put("depth", args.depth)
    if sub in ("expansion", "probe", "recover"):
        if args.j or args.delta is not None:
            sch = dict(block.get("schedule") or DEFAULTS[sub]["schedule"])
            if args.j:
                sch["j_list"] = parse_j_range(args.j)
            if args.delta is not None:
                sch["delta"] = args.delta
            block["schedule"] = sch
    for item in args.set:
        if "=" not in item:
            raise ValidationError("set", f"expected KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        _set_path(block, key.strip(), _json_value(value), sub)
    data[sub] = block
    data["subcommand"] = sub
    if args.out:
        data["output_dir"] = args.out
    return RunConfig.from_dict(data, sub)


def exit_code_for(exc):
    if isinstance(exc, NearEigenvalueError):
        return EXIT_CODES["eigenvalue"]
    if isinstance(exc, (AccuracyError, ResolutionError, TailToleranceError)):
        return EXIT_CODES["accuracy"]
    if isinstance(exc, (ValidationError, DomainError, PreconditionError)):
        return EXIT_CODES["validation"]
    return 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    stage = "config"
    try:
        cfg = config_from_args(args)
        stage = args.subcommand
        summary, manifest = run(cfg)
    except ProbekitError as exc:
        code = exit_code_for(exc)
        kind = {2: "invalid input", 3: "accuracy failure", 4: "near eigenvalue"}.get(code, "error")
        print(f"probekit {args.subcommand}: {kind} [{stage}]: {exc}", file=sys.stderr)
        return code
    print(json.dumps(_jsonable(summary), sort_keys=True))
    print(f"wrote results to {cfg.output_dir} in {manifest['wall_time_s']:.2f} s", file=sys.stderr)
    return EXIT_CODES["ok"]


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands:
  derive  replay a named derivation and print its step table
  sim     run a tube-family configuration (single scale, or --scale)
  verify  run the acceptance criteria
  net     build and describe a direction net
  fit     run the multi-scale experiment from a config with N_list

Exit codes: 0 success, 1 assertion or feasibility failure, 2 usage or
config error. JSON output is deterministic for a fixed seed: keys are
sorted and no wall-clock values are embedded.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import derivations as dv
from .acceptance import format_report_lines, run_acceptance
from .bounds import Bound
from .quadratic import QuadraticNumber, format_significant
from .sim.checks import available_checks, check_structure
from .sim.directions import build_direction_net
from .sim.experiments import (WOLFF_TE, lemma_margin, scaling_experiment,
                              suite_csv_rows, verify_bound, write_csv)
from .sim.families import Infeasible, make_family
from .sim.grid import GridSpec
from .sim.shading import make_shading
from .sim.stats import family_stats
from .sim.tubes import EmptyTube, RasterizationError


class ConfigError(Exception):
    """Invalid config file or flag value; maps to exit code 2."""


# --- config validation ----------------------------------------------------

# Known keys per generator and shading. Kept in one table so an unknown
# key is rejected with its full path instead of being silently ignored.
GENERATOR_PARAMS = {
    "bush": {"count", "m"},
    "hairbrush": {"count", "m"},
    "plany_slab": {"count", "m", "rho"},
    "random": {"count", "m"},
    "single": set(),
}
SHADING_PARAMS = {
    "full": set(),
    "random": {"lam"},
    "two_ends": {"lam", "eps1"},
    "one_end": {"lam", "eps1"},
}
TOP_KEYS = {"dim", "N", "N_list", "generator", "shading", "seed", "checks"}


def _reject_unknown(mapping: dict, allowed: set, prefix: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown key: {prefix}{key}")


def validate_config(raw: object) -> dict:
    """Normalize a sim/fit config, rejecting unknown keys by path."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(raw, TOP_KEYS, "")

    if "dim" not in raw:
        raise ConfigError("missing key: dim")
    dim = raw["dim"]
    if not isinstance(dim, int) or dim not in (3, 4):
        raise ConfigError("dim: must be 3 or 4")

    if "N" in raw and "N_list" in raw:
        raise ConfigError("config has both N and N_list; pick one")
    N = raw.get("N")
    if N is not None and not isinstance(N, int):
        raise ConfigError("N: must be an integer")
    N_list = raw.get("N_list")
    if N_list is not None:
        if (not isinstance(N_list, list)
                or not all(isinstance(n, int) for n in N_list)):
            raise ConfigError("N_list: must be a list of integers")

    gen = raw.get("generator")
    if gen is None:
        raise ConfigError("missing key: generator")
    if not isinstance(gen, dict):
        raise ConfigError("generator: must be an object")
    _reject_unknown(gen, {"name", "params"}, "generator.")
    name = gen.get("name")
    if name not in GENERATOR_PARAMS:
        known = ", ".join(sorted(GENERATOR_PARAMS))
        raise ConfigError(f"generator.name: unknown generator {name!r} "
                          f"(known: {known})")
    gen_params = gen.get("params") or {}
    if not isinstance(gen_params, dict):
        raise ConfigError("generator.params: must be an object")
    _reject_unknown(gen_params, GENERATOR_PARAMS[name], "generator.params.")

    shading = raw.get("shading") or {"kind": "full", "params": {}}
    if not isinstance(shading, dict):
        raise ConfigError("shading: must be an object")
    _reject_unknown(shading, {"kind", "params"}, "shading.")
    kind = shading.get("kind", "full")
    if kind not in SHADING_PARAMS:
        known = ", ".join(sorted(SHADING_PARAMS))
        raise ConfigError(f"shading.kind: unknown shading {kind!r} "
                          f"(known: {known})")
    sh_params = shading.get("params") or {}
    if not isinstance(sh_params, dict):
        raise ConfigError("shading.params: must be an object")
    _reject_unknown(sh_params, SHADING_PARAMS[kind], "shading.params.")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed: must be a nonnegative integer")

    checks = raw.get("checks", [])
    if not isinstance(checks, list):
        raise ConfigError("checks: must be a list")
    for i, c in enumerate(checks):
        if c not in available_checks():
            known = ", ".join(sorted(available_checks()))
            raise ConfigError(f"checks[{i}]: unknown check {c!r} "
                              f"(known: {known})")

    return {
        "dim": dim,
        "N": N,
        "N_list": N_list,
        "generator": {"name": name, "params": dict(gen_params)},
        "shading": {"kind": kind, "params": dict(sh_params)},
        "seed": seed,
        "checks": list(checks),
    }


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return validate_config(raw)


# --- shared output helpers ------------------------------------------------


def _parse_fraction(text: str, flag: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{flag}: not a rational or decimal: {text!r}") \
            from exc


def _decimal(x) -> str:
    if isinstance(x, QuadraticNumber):
        return x.decimal(10)
    return format_significant(Fraction(x), 10)


def _exact_line(label: str, x) -> str:
    x_str = str(x)
    dec = _decimal(x)
    if x_str == dec:
        return f"{label} = {x_str}"
    return f"{label} = {x_str} ≈ {dec}"


def _bound_text(b: Bound) -> str:
    factors = " ".join(f"{n}^({e})" for n, e in b.rhs.items()) or "1"
    return f"{b.quantity.name} {b.relation.value} {factors} [{b.loss.name.lower()}]"


def _step_lines(d: dv.Derivation) -> list[str]:
    lines = [f"derivation {d.name} ({len(d.steps)} steps)"]
    for s in d.steps:
        out = s.output
        if isinstance(out, Bound):
            rendered = _bound_text(out)
        elif isinstance(out, (Fraction, int)):
            rendered = str(out)
        else:
            rendered = str(out)
        lines.append(f"  [{s.index:>2}] {s.label:<28} {s.op:<18} {rendered}")
        lines.append(f"       anchor: {s.anchor}")
    return lines


def _p(args, *values) -> None:
    """Human-readable line; moves to stderr under --json so stdout
    stays parseable."""
    stream = sys.stderr if getattr(args, "json", False) else sys.stdout
    print(*values, file=stream)


def _emit(payload: dict, args) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if getattr(args, "out", None):
        Path(args.out).write_text(text + "\n")
        _p(args, f"wrote {args.out}")
    if getattr(args, "json", False):
        print(text)


# --- derive ---------------------------------------------------------------


def cmd_derive(args) -> int:
    name = args.name
    if name == "lemma-incidence":
        d = dv.derive_lemma_incidence()
        d.replay()
        for line in _step_lines(d):
            _p(args, line)
        mu = d.bound("multiplicity_bound")
        vol = d.bound("volume_bound_m_parallel")
        _p(args, "multiplicity bound:", _bound_text(mu))
        _p(args, "volume bound:      ", _bound_text(vol))
        _emit(d.to_dict(), args)
        return 0

    if name == "restriction-exponent":
        d = dv.derive_restriction_exponent()
        d.replay()
        for line in _step_lines(d):
            _p(args, line)
        _p(args, "p = 702/251 = 2 + 200/251")
        _p(args, _exact_line("p", Fraction(d.meta["p"])))
        _p(args, _exact_line("theta", Fraction(d.meta["theta"])))
        _emit(d.to_dict(), args)
        return 0

    if name == "self-improve":
        alpha = _parse_fraction(args.alpha, "--alpha")
        beta = _parse_fraction(args.beta, "--beta")
        r = dv.derive_self_improve(alpha, beta)
        for line in _step_lines(r["derivation"]):
            _p(args, line)
        _p(args, f"alpha' = {r['alpha_prime']}, "
              f"alpha'' = {r['alpha_double_prime']}")
        _p(args, _exact_line("alpha'", r["alpha_prime"]))
        _p(args, _exact_line("alpha''", r["alpha_double_prime"]))
        _p(args, f"conditions: double_route={r['valid']['double_route']} "
              f"prime_route={r['valid']['prime_route']}")
        payload = r["derivation"].to_dict()
        payload["alpha_prime"] = str(r["alpha_prime"])
        payload["alpha_double_prime"] = str(r["alpha_double_prime"])
        payload["valid"] = r["valid"]
        _emit(payload, args)
        return 0

    if name == "kakeya-iterate":
        eps = _parse_fraction(args.eps, "--eps")
        beta = _parse_fraction(args.beta, "--beta")
        it = dv.iterate_self_improvement(eps, beta=beta)
        _p(args, f"K = {it['K']} steps "
              f"({it['rounded_steps']} with dyadic round-up)")
        _p(args, _exact_line("alpha_K", it["alpha_K"]))
        _p(args, f"alpha* = {it['alpha_star']} "
              f"≈ {it['alpha_star'].decimal(10)}")
        d0 = it["d_zero"]
        _p(args, f"d0 = (159 + sqrt(145))/56 ≈ {d0.decimal(10)}")
        lim = it["te_statements"]
        _p(args, f"terminal statements: {lim['limit']} ; {lim['maximal']}")
        payload = {
            "K": it["K"],
            "rounded_steps": it["rounded_steps"],
            "eps": str(it["eps"]),
            "beta": str(it["beta"]),
            "alpha_K": str(it["alpha_K"]),
            "alpha_K_decimal": _decimal(it["alpha_K"]),
            "alpha_star": str(it["alpha_star"]),
            "alpha_star_decimal": it["alpha_star"].decimal(10),
            "d_zero": str(d0),
            "d_zero_decimal": d0.decimal(10),
            "trajectory": [str(a) for a in it["trajectory"]],
            "strictly_decreasing": it["strictly_decreasing"],
            "te_statements": {k: v.to_dict()
                              for k, v in it["te_statements"].items()},
            "seed_derivation": it["seed_derivation"].to_dict(),
        }
        _emit(payload, args)
        return 0

    if name == "beta-window":
        lo, _, hi = args.alpha.partition(":")
        alpha_lo = _parse_fraction(lo, "--alpha")
        alpha_hi = _parse_fraction(hi, "--alpha") if hi else alpha_lo
        beta = _parse_fraction(args.beta, "--beta")
        r = dv.check_beta_window((alpha_lo, alpha_hi), beta)
        _p(args, f"beta = {beta} on alpha range "
              f"[{r['alpha_range'][0]}, {r['alpha_range'][1]}]")
        for cond, rep in r["conditions"].items():
            verdict = "holds" if rep["holds"] else "FAILS"
            _p(args, f"  {cond}: {verdict}  ({rep['cleared']} >= 0)")
            if rep["witness_alpha"] is not None:
                _p(args, f"    witness alpha = {rep['witness_alpha']}")
        th = r["thresholds_at_alpha_one"]
        _p(args, _exact_line("upper threshold at alpha=1",
                          Fraction(th["upper"])))
        _p(args, _exact_line("lower threshold at alpha=1",
                          Fraction(th["lower"])))
        _p(args, f"both hold: {r['both_hold']}")
        _emit(r, args)
        return 0

    if name == "cor-gz":
        d = dv.derive_trilinear_multiplicity()
        d.replay()
        for line in _step_lines(d):
            _p(args, line)
        _p(args, "result:", _bound_text(d.bound("trilinear_multiplicity")))
        _emit(d.to_dict(), args)
        return 0

    raise ConfigError(f"unknown derivation {name!r}")


# --- sim / fit ------------------------------------------------------------


def _out_base(args, config_path: str) -> Path:
    if args.out:
        base = Path(args.out)
        if base.suffix == ".json":
            base = base.with_suffix("")
        return base
    cfg = Path(config_path)
    return cfg.with_name(cfg.stem + ".report")


def _sibling(base: Path, ext: str) -> Path:
    # not with_suffix: the base may already contain a dotted segment
    return base.with_name(base.name + ext)


def _guard_overwrite(path: Path, config_path: str) -> Path:
    if path.resolve() == Path(config_path).resolve():
        raise ConfigError(f"refusing to overwrite the config file: {path}")
    return path


def _single_row(stats, margins: dict | None) -> dict:
    row = {
        "N": stats.N,
        "delta": str(stats.delta),
        "delta_float": float(stats.delta),
        "tubes": stats.tube_count,
        "lambda": float(stats.lambda_density),
        "mu": float(stats.mu),
        "volume": float(stats.volume),
        "volume_exact": str(stats.volume),
    }
    if margins:
        row["margin_wolff_te"] = margins["wolff_te"].get("margin")
        row["margin_incidence_lemma"] = \
            margins["incidence_lemma"].get("margin")
    return row


def _run_scale(config: dict, seed: int, args, config_path: str) -> int:
    if config["N_list"] is None:
        raise ConfigError("missing key: N_list (required for a scale run)")
    report = scaling_experiment(config["dim"], config["N_list"],
                                config["generator"], seed,
                                config["shading"])
    for row in report["rows"]:
        margin = row.get("margin_wolff_te")
        margin_txt = "" if margin is None else f"  wolff={margin:+.3f}"
        _p(args, f"N={row['N']:>4}  tubes={row['tubes']:>6} "
              f" lambda={row['lambda']:.4f}  volume={row['volume']:.5f}"
              f"{margin_txt}")
    if report["degenerate"]:
        _p(args, f"degenerate fit: {report['reason']}")
    else:
        _p(args, f"d_hat = {report['d_hat']:.6f} "
              f"(slope {report['slope']:.6f} over "
              f"{len(report['rows'])} scales)")
    base = _out_base(args, config_path)
    csv_path = _guard_overwrite(_sibling(base, ".csv"), config_path)
    write_csv(csv_path, suite_csv_rows(report))
    _p(args, f"wrote {csv_path}")
    json_path = _guard_overwrite(_sibling(base, ".json"), config_path)
    Path(json_path).write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n")
    _p(args, f"wrote {json_path}")
    if args.json:
        _p(args, json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_sim(args) -> int:
    config_path = args.config
    config = _load_config(config_path)
    seed = args.seed if args.seed is not None else config["seed"]
    if args.scale:
        return _run_scale(config, seed, args, config_path)
    if config["N"] is None:
        raise ConfigError("missing key: N")
    spec = GridSpec(config["dim"], config["N"])
    fam = make_family(spec, config["generator"], seed)
    fam = make_shading(fam, config["shading"]["kind"],
                       config["shading"]["params"])
    stats = family_stats(fam)
    margins = None
    if spec.dim == 4:
        margins = {
            "wolff_te": verify_bound(stats, WOLFF_TE, slack=0.5),
            "incidence_lemma": lemma_margin(stats),
        }
    checks = {name: check_structure(fam, name)
              for name in config["checks"]}

    _p(args, f"family: {fam.generator['name']} dim={spec.dim} N={spec.N} "
          f"seed={seed} tubes={stats.tube_count}")
    _p(args, _exact_line("lambda", stats.lambda_density))
    _p(args, _exact_line("mu", stats.mu))
    _p(args, _exact_line("volume", stats.volume))
    _p(args, f"distinct cells = {stats.distinct_cells}, "
          f"max multiplicity = {max(stats.histogram)}, "
          f"m_parallel = {stats.m_parallel}")
    if margins:
        for tag, m in margins.items():
            if m.get("degenerate"):
                _p(args, f"margin {tag}: degenerate ({m['reason']})")
            else:
                _p(args, f"margin {tag}: {m['margin']:+.4f} "
                      f"(passes: {m['passes']})")
    for name, rep in checks.items():
        _p(args, f"check {name}: {json.dumps(rep, sort_keys=True)}")

    report = {
        "config": config,
        "seed": seed,
        "stats": stats.to_dict(),
        "margins": margins,
        "checks": checks,
    }
    base = _out_base(args, config_path)
    csv_path = _guard_overwrite(_sibling(base, ".csv"), config_path)
    write_csv(csv_path, suite_csv_rows(
        {"rows": [_single_row(stats, margins)]}))
    _p(args, f"wrote {csv_path}")
    json_path = _guard_overwrite(_sibling(base, ".json"), config_path)
    Path(json_path).write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n")
    _p(args, f"wrote {json_path}")
    if args.json:
        _p(args, json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_fit(args) -> int:
    config_path = args.config
    config = _load_config(config_path)
    seed = args.seed if args.seed is not None else config["seed"]
    return _run_scale(config, seed, args, config_path)


# --- verify ---------------------------------------------------------------


def cmd_verify(args) -> int:
    only = None
    if args.only:
        only = [t for chunk in args.only for t in chunk.split(",") if t]
    try:
        report = run_acceptance(only=only)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for line in format_report_lines(report):
        _p(args, line)
    n = len(report["criteria"])
    passed = sum(r["pass"] for r in report["criteria"])
    _p(args, f"{passed}/{n} criteria passed")
    _emit(report, args)
    return 0 if report["all_pass"] else 1


# --- net ------------------------------------------------------------------


def cmd_net(args) -> int:
    net = build_direction_net(args.dim, args.N, args.seed)
    desc = net.to_dict()
    _p(args, f"net: dim={args.dim} N={args.N} seed={args.seed} "
          f"size={len(net)}")
    _p(args, f"delta = {desc['delta']}")
    if len(net) <= 4096:
        sep = net.min_separation()
        desc["min_separation"] = sep
        _p(args, f"min separation = {sep:.6f}  "
              f"(delta = {float(net.delta):.6f})")
    else:
        _p(args, "min separation: skipped (net too large for the "
              "quadratic check)")
    for key, value in sorted(desc["meta"].items()):
        _p(args, f"  {key}: {value}")
    _emit(desc, args)
    return 0


# --- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kakeya4",
        description="Exact exponent derivations and discrete tube-family "
                    "simulations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive", help="replay a named derivation")
    p.add_argument("name", choices=["lemma-incidence",
                                    "restriction-exponent", "self-improve",
                                    "kakeya-iterate", "beta-window",
                                    "cor-gz"])
    p.add_argument("--alpha", default="1",
                   help="alpha, or lo:hi range for beta-window "
                        "(default: 1)")
    p.add_argument("--beta", default="65/28",
                   help="beta as a rational (default: 65/28)")
    p.add_argument("--eps", default="1e-9",
                   help="termination gap for kakeya-iterate "
                        "(default: 1e-9)")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", help="write the JSON report to this path")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("sim", help="run a tube-family config")
    p.add_argument("config", help="JSON config path")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.add_argument("--scale", action="store_true",
                   help="run the N_list experiment and the fit")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", help="output base path (suffix is replaced "
                                 "by .json/.csv)")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.add_argument("--only", action="append", default=None,
                   metavar="TAG",
                   help="criterion tag (c1..c12) or group (exponents, "
                        "sim, determinism); repeatable, comma-separable")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", help="write the JSON report to this path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("net", help="build and describe a direction net")
    p.add_argument("--dim", type=int, required=True, choices=(3, 4))
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", help="write the JSON description to this path")
    p.set_defaults(func=cmd_net)

    p = sub.add_parser("fit", help="scaling experiment from an N_list "
                                   "config")
    p.add_argument("config", help="JSON config path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", help="output base path")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (dv.ValidityError, Infeasible) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (dv.ReplayMismatch, AssertionError, ArithmeticError,
            RuntimeError, EmptyTube, RasterizationError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

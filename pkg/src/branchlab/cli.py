"""Command line: ``branchlab <command> [options]``."""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

from branchlab import __version__
from branchlab.errors import BranchLabError, BudgetExceeded, InequalityViolated, NotFound, VerificationFailed

COMMANDS = [
    "info", "quotient", "enumerate", "dp-table", "orbit-table", "product-orbits", "partition", "modgen-check",
    "wreath-dp", "subtree-orbits", "stage-search", "alpha", "verify", "report",
]
GLOBAL_KEYS = ["group", "p", "def", "level", "max_m", "mode", "budget_mem", "budget_disk", "budget_time", "jobs", "seed", "out", "format"]


class UsageError(BranchLabError):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _size(text: str) -> int:
    text = str(text).strip().upper()
    for suffix, mult in (("K", 2 ** 10), ("M", 2 ** 20), ("G", 2 ** 30), ("T", 2 ** 40)):
        if text.endswith(suffix) or text.endswith(suffix + "B") or text.endswith(suffix + "IB"):
            return int(float(text.rstrip("IB").rstrip(suffix)) * mult)
    return int(text)


def read_config(path) -> dict:
    """key=value lines; '#' starts a comment; keys use flag names."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _global_parent() -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--config", help="key=value file mirroring the flags")
    g.add_argument("--group", help="grigorchuk or gupta_sidki")
    g.add_argument("--p", type=int, help="prime (Gupta-Sidki family, partition)")
    g.add_argument("--def", dest="def_", metavar="FILE", help="group definition file")
    g.add_argument("--level", type=int)
    g.add_argument("--max-m", dest="max_m", type=int)
    g.add_argument("--mode", choices=["exact", "conjugacy"])
    g.add_argument("--budget-mem", dest="budget_mem", type=_size)
    g.add_argument("--budget-disk", dest="budget_disk", type=_size, help="cap on dedup spill files")
    g.add_argument("--budget-time", dest="budget_time", type=float, help="seconds for one enumeration")
    g.add_argument("--jobs", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--out")
    g.add_argument("--format", choices=["json", "csv"])
    return g


DEFAULTS = {"group": "grigorchuk", "p": None, "def_": None, "level": 3, "max_m": 4, "mode": "conjugacy",
            "budget_mem": 4 * 2 ** 30, "budget_disk": None, "budget_time": None, "jobs": 1, "seed": 0, "out": None, "format": "json"}


def build_parser() -> argparse.ArgumentParser:
    parent = _global_parent()
    ap = _Parser(prog="branchlab", description="Subgroup and orbit growth of self-similar groups at finite levels.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[parent])
        if name == "enumerate":
            sp.add_argument("--subgroup", choices=["G", "K"], default="G")
            sp.add_argument("--resume")
            sp.add_argument("--workdir")
        elif name in ("dp-table", "alpha", "report"):
            sp.add_argument("--subgroup", choices=["G", "K"], default="K" if name == "alpha" else "G")
            sp.add_argument("--levels", help="comma list of levels for a stabilization sweep")
        elif name == "orbit-table":
            sp.add_argument("--bound-exponent", type=int, default=5)
        elif name == "product-orbits":
            sp.add_argument("--k", type=int, default=2)
        elif name == "modgen-check":
            sp.add_argument("--instances", type=int, default=200)
        elif name == "subtree-orbits":
            sp.add_argument("--tree", required=True, help="comma separated vertex words, e.g. 0,01")
            sp.add_argument("--complete", action="store_true")
        elif name == "stage-search":
            sp.add_argument("--ell", type=int, default=1)
            sp.add_argument("--ell-prime", dest="ell_prime", type=int, default=3)
            sp.add_argument("--f", dest="f_table", default=None, help="n:value pairs, e.g. 1:2,2:3; default f(n)=n")
            sp.add_argument("--time-budget", type=float, default=600.0)
        elif name == "verify":
            from branchlab.verify import REGISTRY

            sp.add_argument("check", choices=sorted(REGISTRY))
            sp.add_argument("--instances", type=int)
            sp.add_argument("--samples", type=int)
            sp.add_argument("--levels")
    return ap


def resolve(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        raw = read_config(args.config)
        for k, v in raw.items():
            key = "def_" if k == "def" else k
            if key not in cfg:
                continue
            if key in ("p", "level", "max_m", "jobs", "seed"):
                v = int(v)
            elif key in ("budget_mem", "budget_disk"):
                v = _size(v)
            elif key == "budget_time":
                v = float(v)
            cfg[key] = v
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    budgets = [cfg["budget_mem"], cfg["jobs"]] + [cfg[k] for k in ("budget_disk", "budget_time") if cfg[k] is not None]
    if any(b <= 0 for b in budgets):
        raise UsageError("budgets and job counts must be positive")
    return cfg


def config_hash(cfg: dict, command: str, extra: dict) -> str:
    blob = json.dumps({"command": command, "config": {k: v for k, v in cfg.items() if k not in ("out", "format")},
                       "extra": extra}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_group(cfg: dict):
    from branchlab.selfsim import builtin_group, parse_group_def

    if cfg["def_"]:
        g = parse_group_def(Path(cfg["def_"]).read_text())
        return dataclasses.replace(g, name=Path(cfg["def_"]).stem)
    name = str(cfg["group"]).replace("-", "_").lower()
    p = cfg["p"]
    if ":" in name:
        name, p = name.split(":")
        p = int(p)
    elif name.startswith("gupta_sidki_") and name[len("gupta_sidki_"):].isdigit():
        p = int(name[len("gupta_sidki_"):])
        name = "gupta_sidki"
    return builtin_group(name, p)


def _quotient(group, level, which="G"):
    from branchlab.selfsim import distinguished_subgroup, level_quotient

    return distinguished_subgroup(group, level) if which == "K" else level_quotient(group, level)


def _levels(text, default):
    if not text:
        return default
    return [int(x) for x in str(text).split(",") if x.strip()]


def _f_table(text, max_m):
    if not text:
        return {n: n for n in range(1, max_m + 1)}
    out = {}
    for part in text.split(","):
        n, v = part.split(":")
        out[int(n)] = int(v)
    return out


# commands ----------------------------------------------------------------

def cmd_info(cfg, args):
    from branchlab.selfsim import format_group_def

    g = load_group(cfg)
    return {"name": g.name, "p": g.p, "generators": g.names, "metadata": g.metadata,
            "definition": format_group_def(g)}, None


def cmd_quotient(cfg, args):
    from branchlab.permgroup import index

    g = load_group(cfg)
    Q = _quotient(g, cfg["level"])
    out = {"group": g.name, "level": cfg["level"], "degree": Q.degree, "order": str(Q.order),
           "generators": [list(map(int, x)) for x in Q.generators]}
    if "K" in g.metadata:
        Kq = _quotient(g, cfg["level"], "K")
        out["K_order"] = str(Kq.order)
        out["K_index"] = index(Q, Kq)
    return out, None


def _job(cfg, Q, group, level, workdir=None):
    from branchlab.lattice import EnumerationJob

    return EnumerationJob(Q, group.p, cfg["max_m"], cfg["mode"], cfg["budget_mem"], cfg["jobs"],
                          disk_budget=cfg["budget_disk"], time_budget=cfg["budget_time"], workdir=workdir, group_id=group.name, level=level)


def cmd_enumerate(cfg, args):
    from branchlab.lattice import run_enumeration, s_table

    g = load_group(cfg)
    Q = _quotient(g, cfg["level"], args.subgroup)
    res = run_enumeration(_job(cfg, Q, g, cfg["level"], args.workdir), resume_token=args.resume)
    tables = s_table(res, min(cfg["max_m"], res.complete_to))
    out = {"group": g.name, "subgroup": args.subgroup, "level": cfg["level"], "mode": cfg["mode"],
           "complete_to": res.complete_to, "tables": tables.to_json(),
           "records": [{"m": r.m, "key": r.canonical_key.hex(), "dp": r.dp, "orbits": r.orbit_count,
                        "normalizer_index_exp": r.normalizer_index_exp} for r in res.records]}
    return out, tables.to_csv()


def _tables(cfg, g, which, levels):
    from branchlab.lattice import run_enumeration, s_table, stabilization_sweep

    if len(levels) > 1:
        sel = "K" if which == "K" else "G"
        return stabilization_sweep(g, sel, cfg["max_m"], levels, cfg["mode"], cfg["budget_mem"], cfg["jobs"])
    Q = _quotient(g, levels[0], which)
    res = run_enumeration(_job(cfg, Q, g, levels[0]))
    return s_table(res, min(cfg["max_m"], res.complete_to))


def cmd_dp_table(cfg, args):
    t = _tables(cfg, load_group(cfg), args.subgroup, _levels(args.levels, [cfg["level"]]))
    return t.to_json(), t.to_csv()


def cmd_orbit_table(cfg, args):
    from branchlab.lattice import run_enumeration
    from branchlab.orbits import orbit_table, stabilizer_witnesses

    g = load_group(cfg)
    Q = _quotient(g, cfg["level"])
    res = run_enumeration(_job(cfg, Q, g, cfg["level"]))
    table = orbit_table(res, cfg["level"], g.name, args.bound_exponent)
    wit = [{"level_j": w.level_j, "m": w.handle.index_exp, "orbits": w.orbits, "bound": w.bound, "pass": w.passed}
           for w in stabilizer_witnesses(Q, g.p)]
    out = table.to_json()
    out["witnesses"] = wit
    if not table.passed or not all(w["pass"] for w in wit):
        raise _failure("orbit table bound violated", out)
    return out, table.to_csv()


def cmd_product_orbits(cfg, args):
    from branchlab.orbits import product_orbit_table

    g = load_group(cfg)
    Q = _quotient(g, cfg["level"])
    table, extra = product_orbit_table(Q, args.k, g.p, cfg["max_m"], cfg["mode"], level=cfg["level"],
                                       memory_budget=cfg["budget_mem"])
    out = table.to_json()
    out.update(extra)
    return out, table.to_csv()


def cmd_partition(cfg, args):
    from branchlab.orbits import partition_min_parts

    p = cfg["p"] or 2
    rows = [{"p": p, "m": m, "min_parts": partition_min_parts(p, m), "expected": (p - 1) * m + 1}
            for m in range(1, cfg["max_m"] + 1)]
    for r in rows:
        r["pass"] = r["min_parts"] == r["expected"]
    csv_text = "p,m,min_parts,expected,pass\n" + "".join(
        f"{r['p']},{r['m']},{r['min_parts']},{r['expected']},{int(r['pass'])}\n" for r in rows)
    out = {"rows": rows, "pass": all(r["pass"] for r in rows)}
    if not out["pass"]:
        raise _failure("partition minimum differs from (p-1)m+1", out)
    return out, csv_text


def cmd_modgen_check(cfg, args):
    from branchlab.verify import check_modgen

    primes = (cfg["p"],) if cfg["p"] else (2, 3)
    out = check_modgen(args.instances, cfg["seed"], primes)
    if not out["pass"]:
        raise _failure("module generation check failed", out)
    return out, None


def cmd_wreath_dp(cfg, args):
    from branchlab.lattice import run_enumeration, s_table
    from branchlab.modgen import phi_orbit_surjection, wreath_quotient

    g = load_group(cfg)
    Q = _quotient(g, cfg["level"])
    W = wreath_quotient(Q, g.p)
    res = run_enumeration(_job(cfg, Q, g, cfg["level"]))
    tab = s_table(res, min(cfg["max_m"], res.complete_to))
    dpm = [tab.dp_max(m) for m in range(len(tab.rows))]
    rows = []
    for r in res.records:
        h = r.handle(Q, g.p)
        rep = phi_orbit_surjection(W, h, max(dpm[:h.index_exp + 1]))
        rep["key"] = r.canonical_key.hex()
        rows.append(rep)
    out = {"group": g.name, "level": cfg["level"], "wreath_order": str(W.whole.order), "rows": rows,
           "caveat": "upper bound uses level-relative d_p maxima",
           "lower_pass": all(r["check"] and r["lower_ok"] for r in rows),
           "upper_pass": all(r["upper_ok"] for r in rows)}
    if not out["lower_pass"]:
        raise _failure("orbit surjection check failed", out)
    return out, None


def cmd_subtree_orbits(cfg, args):
    from branchlab.lattice import run_enumeration
    from branchlab.pcgroup import PcGroup
    from branchlab.permgroup import CosetSpace
    from branchlab.subtree import ColouredSubtree, complete, embedding_stabilizer

    g = load_group(cfg)
    Q = _quotient(g, cfg["level"])
    words = [w for w in args.tree.split(",") if w.strip()]
    S = ColouredSubtree.of(words, g.p)
    if args.complete:
        S = complete(S)
    V = embedding_stabilizer(Q, S)
    space = CosetSpace(Q, V)
    res = run_enumeration(_job(cfg, Q, g, cfg["level"]))
    view = Q.pc(g.p)
    best = {}
    for r in res.records:
        U = Q.subgroup_from_pc(view, PcGroup.from_key(view.layout, r.canonical_key))
        o = space.orbit_count(U)
        if r.m not in best or o > best[r.m]["orbits"]:
            best[r.m] = {"m": r.m, "orbits": o, "key": r.canonical_key.hex()}
    rows = [best[m] for m in sorted(best)]
    out = {"group": g.name, "level": cfg["level"], "tree": S.to_json(), "embeddings": Q.order // V.order,
           "rows": rows}
    csv_text = "m,orbits,key\n" + "".join(f"{r['m']},{r['orbits']},{r['key']}\n" for r in rows)
    return out, csv_text


def cmd_stage_search(cfg, args):
    from branchlab.subtree import ColouredSubtree, complete, stage_search

    g = load_group(cfg)
    Q = _quotient(g, args.ell_prime)
    f = _f_table(args.f_table, cfg["max_m"])
    S_prev = complete(ColouredSubtree.path(args.ell + 1, g.p))
    try:
        res = stage_search(Q, S_prev, args.ell, args.ell_prime, f, time_budget=args.time_budget, jobs=cfg["jobs"],
                           mode=cfg["mode"], memory_budget=cfg["budget_mem"])
        out = res.to_json()
        out["found"] = True
    except NotFound as exc:
        out = exc.result.to_json()
        out["found"] = False
        out["message"] = str(exc)
    out["exploratory"] = True
    return out, None


def cmd_alpha(cfg, args):
    from branchlab.growth import alpha_estimate
    from branchlab.permgroup import dp

    g = load_group(cfg)
    meta = g.metadata
    levels = _levels(args.levels, [cfg["level"] - 1, cfg["level"]] if cfg["level"] > 1 else [cfg["level"]])
    tables = _tables(cfg, g, args.subgroup, levels)
    dK = dp(_quotient(g, levels[-1], "K"), g.p)
    est = alpha_estimate(tables, meta["k"], meta["l"], meta["d"], dK, g.name)
    out = est.to_json()
    out["dp_K_stated"] = meta.get("dK", None)
    out["levels"] = levels
    if not est.consistent:
        raise _failure("alpha bracket is inconsistent", out)
    return out, None


def cmd_report(cfg, args):
    from branchlab.growth import alpha_estimate, growth_bounds_report
    from branchlab.permgroup import dp

    g = load_group(cfg)
    levels = _levels(args.levels, [cfg["level"]])
    tables = _tables(cfg, g, args.subgroup, levels)
    est = None
    if {"k", "l", "d"} <= set(g.metadata):
        dK = dp(_quotient(g, levels[-1], "K"), g.p)
        est = alpha_estimate({0: dK}, g.metadata["k"], g.metadata["l"], g.metadata["d"], dK, g.name)
    report = growth_bounds_report(tables, est)
    out = {"tables": tables.to_json(), "bounds": report, "alpha": est.to_json() if est else None}
    return out, tables.to_csv()


def cmd_verify(cfg, args):
    from branchlab.verify import REGISTRY

    name = args.check
    g_kind = None
    kw = {}
    if name == "partition":
        if cfg["p"]:
            kw["cases"] = ((cfg["p"], cfg["max_m"]),)
    elif name in ("orbit-upper", "witnesses", "congruence-index", "growth-bounds"):
        g = load_group(cfg)
        g_kind = "grigorchuk" if g.name == "grigorchuk" else "gupta_sidki"
        kw.update(kind=g_kind, p=g.p)
        if name == "orbit-upper":
            kw.update(level=cfg["level"], max_m=cfg["max_m"], required_m=cfg["max_m"], memory_budget=cfg["budget_mem"])
        elif name == "witnesses":
            kw["levels"] = _levels(args.levels, list(range(1, cfg["level"] + 1)))
        elif name == "congruence-index":
            kw["max_level"] = cfg["level"]
        else:
            kw["levels"] = _levels(args.levels, [cfg["level"]])
    elif name == "modgen":
        kw.update(instances=args.instances or 200, seed=cfg["seed"])
    elif name == "permutation-product":
        kw.update(samples=args.samples or 500, seed=cfg["seed"])
    elif name in ("completion",):
        kw.update(cases=args.samples or 200, seed=cfg["seed"])
    out = REGISTRY[name](**kw)
    if not out["pass"]:
        raise _failure(f"verification {name} failed", out)
    return out, None


HANDLERS = {name: globals()["cmd_" + name.replace("-", "_")] for name in COMMANDS}


def _failure(message, payload):
    err = VerificationFailed(message)
    err.payload = payload
    return err


def _emit(cfg, envelope, csv_text):
    if cfg["format"] == "csv" and csv_text is not None:
        text = f"# schema=1 version={envelope['version']} config_hash={envelope['config_hash']} " \
               f"seed={envelope['seed']}\n" + csv_text
    else:
        text = json.dumps(envelope, indent=2, sort_keys=False, default=str) + "\n"
    if cfg["out"]:
        Path(cfg["out"]).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(args)
    except (BranchLabError, ValueError, OSError) as exc:
        print(f"branchlab: {exc}", file=sys.stderr)
        return 1
    extra = {k: v for k, v in vars(args).items() if k not in GLOBAL_KEYS + ["def_", "config", "command"]}
    envelope = {"schema": 1, "command": args.command, "version": __version__,
                "config_hash": config_hash(cfg, args.command, extra), "seed": cfg["seed"]}
    try:
        result, csv_text = HANDLERS[args.command](cfg, args)
        envelope["status"] = "ok"
        envelope["result"] = result
        _emit(cfg, envelope, csv_text)
        return 0
    except VerificationFailed as exc:
        envelope.update(status="violation", message=str(exc), result=getattr(exc, "payload", None))
        _emit(cfg, envelope, None)
        return 3
    except InequalityViolated as exc:
        envelope.update(status="violation", message=str(exc), result=getattr(exc, "report", None))
        _emit(cfg, envelope, None)
        return 3
    except BudgetExceeded as exc:
        envelope.update(status="budget", message=str(exc), resume_token=exc.resume_token)
        _emit(cfg, envelope, None)
        return 2
    except BranchLabError as exc:
        print(f"branchlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"branchlab: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

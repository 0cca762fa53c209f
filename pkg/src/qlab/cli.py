"""Command line entry point: ``qlab verify|decouple|count|search|theorem``.

Settings come from an optional key=value file (``--config``) and are
overridden by flags.  The thread count is read from QLAB_THREADS unless
``--threads`` is given.  Exit codes: 0 when every gated check passes, 1 on a
violation, 2 on invalid input or a refused budget.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import counting, lab
from .engine import LadderError, build_ladder, dump_state, omega_decomposition, prune
from .qadic import check_prime, log_q

LEMMA_GROUPS = {
    "pruning": ("prunedmon", "increase"),
    "low-high": ("low-lemma", "high-lemma"),
    "approximation": ("pruning-approx", "pruned-approx"),
    "broad-narrow": ("initial-narrow", "broad-pointwise", "narrow-pointwise", "narrow-lemma"),
    "pointwise": None,
    "level-set": None,
    "bilinear-broad": None,
    "bilinear": None,
    "theorem": None,
    "all": None,
}
POINTWISE_GROUPS = ("pruning", "low-high", "approximation", "broad-narrow", "pointwise")


class Refused(Exception):
    """The run was declined before producing output."""


@dataclass
class RunConfig:
    q: int = 3
    eps: float = 1.0
    R: int = 3 ** 8
    seeds: int = 100
    first_seed: int = 0
    profiles: tuple[str, ...] = ("flat", "random-phase", "sparse-tube")
    lemma: str = "all"
    out: str | None = None
    budget_gb: float = 4.0
    threads: int = 1
    timing: bool = False
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        check_prime(self.q)
        L = log_q(self.R, self.q)
        if L % 2 or L == 0:
            raise ValueError("R must be a positive even power of q")
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        for p in self.profiles:
            if p not in lab.PROFILES:
                raise ValueError(f"unknown profile {p!r}")
        if self.seeds < 0 or self.threads < 1:
            raise ValueError("seeds must be >= 0 and threads >= 1")

    @property
    def seed_list(self) -> list[int]:
        return list(range(self.first_seed, self.first_seed + self.seeds))

    def public(self) -> dict:
        d = asdict(self)
        for k in ("out", "threads", "timing", "extra", "budget_gb"):
            d.pop(k)
        d["profiles"] = list(self.profiles)
        return d


# ------------------------------------------------------------------ helpers
def estimate_bytes(q: int, R: int) -> int:
    """Peak memory of one instance at scale R (measured: about 9 bytes per unit cell at 3^8)."""
    return 12 * R * R + 64 * 1024 ** 2


def check_budget(cfg: RunConfig, R: int | None = None) -> None:
    need = estimate_bytes(cfg.q, cfg.R if R is None else R)
    have = cfg.budget_gb * 1024 ** 3
    if need * min(cfg.threads, 8) > have:
        raise Refused(f"R={R or cfg.R} needs about {need / 1024 ** 3:.2f} GB per worker; "
                      f"budget is {cfg.budget_gb} GB")


def ordered_map(cfg: RunConfig, fn: Callable, items: Sequence) -> list:
    """map with results in input order whatever the thread count."""
    if cfg.threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(cfg.threads) as ex:
        return list(ex.map(fn, items))


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".part")
    tmp.write_text(text)
    tmp.replace(path)


def reports_document(cfg: RunConfig, reports: list[lab.InequalityReport], command: str) -> str:
    gated = [r for r in reports if r.gated]
    doc = {
        "command": command,
        "config": cfg.public(),
        "summary": {"reports": len(reports), "gated": len(gated),
                    "passed": sum(1 for r in gated if r.passed),
                    "violations": sum(1 for r in gated if not r.passed),
                    "report_only": len(reports) - len(gated)},
        "reports": [r.to_json() for r in reports],
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def _select(reports: list[lab.InequalityReport], group: str) -> list[lab.InequalityReport]:
    prefixes = LEMMA_GROUPS.get(group)
    if prefixes is None:
        return reports
    return [r for r in reports if any(r.lemma == p or r.lemma.startswith(p + "-") for p in prefixes)]


def _profile_for(cfg: RunConfig, index: int) -> str:
    return cfg.profiles[index % len(cfg.profiles)]


# ------------------------------------------------------------------ verify
def _verify_instance(cfg: RunConfig, group: str, seed: int, profile: str) -> list[lab.InequalityReport]:
    ladder = build_ladder(cfg.R, cfg.eps, cfg.q)
    small = cfg.R <= cfg.q ** 4
    sig = lab.random_instance(cfg.R, seed, profile, cfg.q)
    out: list[lab.InequalityReport] = []
    ws = lab.Workspace(sig, ladder, exhaustive=small)
    t0 = time.perf_counter()
    if group in POINTWISE_GROUPS or group == "all":
        reps = lab.check_pointwise_suite(sig, ladder, seed, ws=ws)
        out += reps if group == "all" else _select(reps, group)
    if group in ("level-set", "all"):
        alphas = ws.bins().edges if group == "level-set" else (ws.pigeonhole_alpha(),)
        for a in alphas:
            out += lab.check_level_set(ws, a, seed)
    if group in ("bilinear-broad", "all"):
        out += lab.check_bilinear_broad(ws, seed)
    if group in ("theorem", "all"):
        out += lab.check_theorem(sig, cfg.eps, seed)[0]
    for r in out:
        r.params["profile"] = profile
    if cfg.timing:
        ms = (time.perf_counter() - t0) * 1000 / max(len(out), 1)
        for r in out:
            r.runtime_ms = ms
    return out


def _verify_bilinear(cfg: RunConfig, seed: int) -> list[lab.InequalityReport]:
    t0 = time.perf_counter()
    inst = lab.random_bilinear_instance(seed, cfg.q)
    out = [lab.check_bilinear_restriction(inst, seed)]
    # orthogonality needs intervals coarser than delta^(1/2)
    inst = lab.random_bilinear_instance(seed, cfg.q, delta_exp=4, kappa_exp=0)
    off, diag, n = lab.theta_cross_terms(inst)
    out.append(lab.scalar_report("theta-orthogonality", off, 1e-10, lab.ONE,
                                 {"q": cfg.q, "delta": inst.delta, "kappa": inst.kappa,
                                  "products": n, "diagonal_max": diag}, seed))
    if cfg.timing:
        ms = (time.perf_counter() - t0) * 1000 / len(out)
        for r in out:
            r.runtime_ms = ms
    return out


def cmd_verify(cfg: RunConfig) -> int:
    group = cfg.lemma
    if group not in LEMMA_GROUPS:
        raise ValueError(f"unknown lemma group {group!r}; choose from {', '.join(LEMMA_GROUPS)}")
    build_ladder(cfg.R, cfg.eps, cfg.q)
    check_budget(cfg)
    reports: list[lab.InequalityReport] = []
    if group != "bilinear":
        jobs = [(s, _profile_for(cfg, i)) for i, s in enumerate(cfg.seed_list)]
        for chunk in ordered_map(cfg, lambda j: _verify_instance(cfg, group, *j), jobs):
            reports += chunk
    if group in ("bilinear", "all"):
        for chunk in ordered_map(cfg, lambda s: _verify_bilinear(cfg, s), cfg.seed_list):
            reports += chunk
    out = Path(cfg.out or f"verify_{group}.json")
    write_atomic(out, reports_document(cfg, reports, f"verify {group}"))
    bad = lab.violations(reports)
    print(f"{len(reports)} reports, {len(bad)} violations -> {out}")
    return 1 if bad else 0


# ------------------------------------------------------------------ decouple
def cmd_decouple(cfg: RunConfig) -> int:
    """The full pipeline per instance: alpha scan, pruning, high/low regions,
    level set and every check, written to one directory."""
    ladder = build_ladder(cfg.R, cfg.eps, cfg.q)
    check_budget(cfg)
    outdir = Path(cfg.out or "decouple")
    jobs = [(s, _profile_for(cfg, i)) for i, s in enumerate(cfg.seed_list)]

    def run(job):
        seed, profile = job
        sig = lab.random_instance(cfg.R, seed, profile, cfg.q)
        ws = lab.Workspace(sig, ladder, exhaustive=cfg.R <= cfg.q ** 4)
        alpha = ws.pigeonhole_alpha()
        st = prune(ws.dec, ws.lam(alpha))
        om = omega_decomposition(st)
        reps = (lab.check_pruning_suite(ws, st, om, seed, alpha)
                + lab.check_broad_narrow_suite(ws, seed)
                + lab.check_level_set(ws, alpha, seed, st)
                + lab.check_bilinear_broad(ws, seed))
        for r in reps:
            r.params["profile"] = profile
        U = ws.level_set(alpha)
        state = json.loads(dump_state(st, om))
        state["alpha"] = alpha
        state["level_set"] = {"measure": U.measure, "label": U.label, "squares": int(U.bits.sum())}
        return f"{profile}_{seed}", reps, json.dumps(state, sort_keys=True) + "\n"

    results = ordered_map(cfg, run, jobs)
    all_reps = [r for _, reps, _ in results for r in reps]
    document = reports_document(cfg, all_reps, "decouple")
    for name, _, state in results:
        write_atomic(outdir / f"state_{name}.json", state)
    write_atomic(outdir / "reports.json", document)
    bad = lab.violations(all_reps)
    print(f"{len(results)} instances, {len(all_reps)} reports, {len(bad)} violations -> {outdir}")
    return 1 if bad else 0


# ------------------------------------------------------------------ count / search
def cmd_count(cfg: RunConfig) -> int:
    max_M = int(cfg.extra.get("max_M", 60))
    if max_M < 1:
        raise ValueError("--max-M must be positive")
    if 24 * max_M ** 3 > cfg.budget_gb * 1024 ** 3:
        raise Refused(f"counting up to M={max_M} exceeds the memory budget")
    out = Path(cfg.out or "counts.csv")
    buf = io.StringIO()
    with ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else _NoPool() as ex:
        rows = [(M, counting.count_solutions(M, ex), None) for M in range(1, max_M + 1)]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["M", "S", "flat_ratio"])
    for M, S, _ in rows:
        w.writerow([M, S, f"{counting.flat_ratio(M, S):.12f}"])
    write_atomic(out, buf.getvalue())
    print(f"{max_M} rows -> {out}")
    return 0


class _NoPool:
    def __enter__(self):
        return None

    def __exit__(self, *exc):
        return False


def cmd_search(cfg: RunConfig) -> int:
    Ms = [int(x) for x in str(cfg.extra.get("M", "8,27,81")).split(",") if x]
    iterations = int(cfg.extra.get("iterations", 100))
    restarts = int(cfg.extra.get("restarts", 32))
    if any(M < 1 for M in Ms) or iterations < 0 or restarts < 1:
        raise ValueError("M, iterations and restarts must be positive")
    if max(Ms) ** 3 * 64 > cfg.budget_gb * 1024 ** 3:
        raise Refused("search index exceeds the memory budget")
    seed = cfg.first_seed
    with ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else _NoPool() as ex:
        results = [counting.k_lower_bound(M, iterations, seed, restarts, ex) for M in sorted(Ms)]
    curve = counting.cumulative_max([r.best_ratio for r in results])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["M", "best_ratio", "seed", "iterations"])
    for r, c in zip(results, curve):
        w.writerow([r.M, f"{c:.12f}", r.seed, r.iterations])
    out = Path(cfg.out or "klower.csv")
    write_atomic(out, buf.getvalue())
    bad = [r.M for r in results if r.best_ratio < r.flat - 1e-12]
    print(f"{len(results)} rows -> {out}")
    return 1 if bad else 0


# ------------------------------------------------------------------ theorem
def cmd_theorem(cfg: RunConfig) -> int:
    Rs = [int(x) for x in str(cfg.extra.get("R_list", f"{cfg.q ** 4},{cfg.R}")).split(",") if x]
    for R in Rs:
        L = log_q(R, cfg.q)
        if L % 2 or L == 0:
            raise ValueError("each R must be a positive even power of q")
        check_budget(cfg, R)
    jobs = [(R, s, _profile_for(cfg, i)) for R in Rs for i, s in enumerate(cfg.seed_list)]

    def run(job):
        R, seed, profile = job
        t0 = time.perf_counter()
        reps, summary = lab.check_theorem(lab.random_instance(R, seed, profile, cfg.q), cfg.eps, seed)
        if cfg.timing:
            ms = (time.perf_counter() - t0) * 1000 / len(reps)
            for r in reps:
                r.runtime_ms = ms
        return R, seed, profile, reps, summary

    results = ordered_map(cfg, run, jobs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["R", "eps", "profile", "seed", "lhs", "rhs_core", "ratio", "normalized", "chain_pass"])
    all_reps = []
    for R, seed, profile, reps, s in results:
        ok = not lab.violations(reps)
        w.writerow([R, cfg.eps, profile, seed, repr(s["lhs"]), repr(s["rhs_core"]), repr(s["ratio"]),
                    repr(s["normalized"]), int(ok)])
        all_reps += reps
    out = Path(cfg.out or "theorem.csv")
    write_atomic(out, buf.getvalue())
    bad = lab.violations(all_reps) + [r for r in results if not math.isfinite(r[4]["normalized"])]
    print(f"{len(results)} rows -> {out}")
    return 1 if bad else 0


COMMANDS = {"verify": cmd_verify, "decouple": cmd_decouple, "count": cmd_count,
            "search": cmd_search, "theorem": cmd_theorem}


# ------------------------------------------------------------------ parsing
def read_config(path: str | Path) -> dict[str, str]:
    """key=value lines; '#' starts a comment; keys may use - or _."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key=value")
        k, v = (x.strip() for x in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _bool(v: str) -> bool:
    if isinstance(v, bool):
        return v
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qlab", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="key=value file; flags override it")
    sub = p.add_subparsers(dest="command", required=True)
    d = RunConfig()
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--q", type=int, default=d.q)
        sp.add_argument("--eps", type=float, default=d.eps)
        sp.add_argument("--R", type=int, default=d.R)
        sp.add_argument("--seeds", type=int, default=d.seeds)
        sp.add_argument("--first-seed", type=int, default=d.first_seed)
        sp.add_argument("--profiles", default=",".join(d.profiles))
        sp.add_argument("--out")
        sp.add_argument("--budget-gb", type=float, default=d.budget_gb)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--timing", action="store_true")
        if name == "verify":
            sp.add_argument("--lemma", default=d.lemma, choices=sorted(LEMMA_GROUPS))
        if name == "count":
            sp.add_argument("--max-M", dest="max_M", type=int, default=60)
        if name == "search":
            sp.add_argument("--M", default="8,27,81", help="comma separated")
            sp.add_argument("--iterations", type=int, default=100)
            sp.add_argument("--restarts", type=int, default=32)
        if name == "theorem":
            sp.add_argument("--R-list", dest="R_list", help="comma separated scales")
            sp.set_defaults(seeds=1, profiles="flat,random-phase,sparse-tube")
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        cfg = read_config(known.config)
        sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        for sp in sub.choices.values():
            for action in sp._actions:
                if action.dest in cfg:
                    raw = cfg[action.dest]
                    if action.const is True:
                        sp.set_defaults(**{action.dest: _bool(raw)})
                    else:
                        sp.set_defaults(**{action.dest: action.type(raw) if action.type else raw})
            unknown = set(cfg) - {a.dest for a in sp._actions}
            if unknown and sp is sub.choices.get(_command_of(argv)):
                raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return parser.parse_args(argv)


def _command_of(argv: Sequence[str]) -> str | None:
    for a in argv:
        if a in COMMANDS:
            return a
    return None


def to_config(ns: argparse.Namespace) -> RunConfig:
    threads = ns.threads
    if threads is None:
        threads = int(os.environ.get("QLAB_THREADS", "1") or 1)
    extra = {k: getattr(ns, k) for k in ("max_M", "M", "iterations", "restarts", "R_list")
             if getattr(ns, k, None) is not None}
    return RunConfig(q=ns.q, eps=ns.eps, R=ns.R, seeds=ns.seeds, first_seed=ns.first_seed,
                     profiles=tuple(x for x in ns.profiles.split(",") if x),
                     lemma=getattr(ns, "lemma", "all"), out=ns.out, budget_gb=ns.budget_gb,
                     threads=threads, timing=ns.timing, extra=extra)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = _apply_config(parser, argv)
        cfg = to_config(ns)
        cfg.validate()
        return COMMANDS[ns.command](cfg)
    except Refused as exc:
        print(f"qlab: refused: {exc}", file=sys.stderr)
        return 2
    except (ValueError, LadderError, OSError) as exc:
        print(f"qlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

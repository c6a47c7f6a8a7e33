"""``hxlab`` command line.

Exit codes: 0 success, 2 input/parse error, 3 domain error, 4 a "lower bound <= upper bound"
assertion failed.  Reports go to stdout unless ``--out`` is given (written atomically);
diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .errors import DomainError, HxlabError, LatticeMismatch, ParseError
from .exponents import inf

EXIT_PARSE, EXIT_DOMAIN, EXIT_ASSERT = 2, 3, 4


class AssertionFailed(Exception):
    def __init__(self, msg: str, body: str):
        super().__init__(msg)
        self.body = body


# helpers --------------------------------------------------------------------------

def _real(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "infinity", "∞"):
        return inf
    try:
        if "/" in t:
            a, b = t.split("/")
            return float(a) / float(b)
        return float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _reals(text: str) -> list[float]:
    return [_real(x) for x in text.split(",") if x.strip()]


def _read_json(path: str, field: str):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {path} ({exc.strerror})", field) from exc
    try:
        return json.loads(raw), hashlib.sha256(raw).hexdigest()
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {path} ({exc.msg})", field) from exc


def _load_fn(path: str, field: str, weight=None):
    from .lattice import parse_function
    obj, digest = _read_json(path, field)
    return parse_function(obj, weight), {"path": path, "sha256": digest}


def _load_collection(path: str):
    from .sparse import parse_collection
    obj, digest = _read_json(path, "collection")
    return parse_collection(obj), {"path": path, "sha256": digest}


def _timestamp(args) -> str | None:
    if getattr(args, "timestamp", None):
        return args.timestamp
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        import datetime as dt
        return dt.datetime.fromtimestamp(int(epoch), dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return None


def _num(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def manifest(args, inputs: list, exponents=None, level=None) -> dict:
    from .calibration import load_calibration
    try:
        cal = load_calibration().sha256
    except (OSError, KeyError, ValueError):
        cal = None
    return {"command": args.command_path, "inputs": inputs,
            "exponents": None if exponents is None else {k: _num(v) for k, v in exponents.items()},
            "seed": getattr(args, "seed", None), "budget": getattr(args, "budget", None),
            "level": level, "calibration_sha256": cal, "tool_version": __version__,
            "timestamp": _timestamp(args)}


def render(args, man: dict, report, csv_text: str | None = None) -> str:
    if args.format == "csv":
        if csv_text is None:
            raise DomainError("this command has no CSV form; use --format json")
        return "# manifest: " + json.dumps(man, sort_keys=True, separators=(",", ":")) + "\n" + csv_text
    return json.dumps({"manifest": man, "report": report}, indent=2, sort_keys=True) + "\n"


def write_atomic(path: str, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(args, text: str) -> None:
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _pair(args):
    from .weights import ExponentPair
    return ExponentPair(args.p0, args.q0)


# commands ------------------------------------------------------------------------

def cmd_constants(args) -> str:
    from .weights import constants_report
    w, meta = _load_fn(args.input, "input", weight=True)
    rep = constants_report(w, args.p or [2.0], args.s or [2.0], args.family)
    man = manifest(args, [meta], level=w.level)
    return render(args, man, rep.to_json(), rep.to_csv())


def cmd_decompose(args) -> str:
    from .czd import cz_bounded, cz_unbounded
    f, meta = _load_fn(args.input, "input", weight=False)
    if not args.lam > 0:
        raise DomainError("lambda must be positive")
    dec = cz_bounded(f, args.lam) if args.mode == "bounded" else cz_unbounded(f, args.lam)
    inv = {k: bool(v) for k, v in dec.invariants().items()}
    body = dec.to_json()
    body["invariants"] = inv
    body["all_pass"] = all(inv.values())
    man = manifest(args, [meta], level=f.level)
    import csv
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["invariant", "pass"])
    for k in sorted(inv):
        wr.writerow([k, inv[k]])
    return render(args, man, body, buf.getvalue())


def cmd_sparse_form(args) -> str:
    from .sparse import SparseFormSpec, sparse_form
    S, meta = _load_collection(args.collection)
    f, mf = _load_fn(args.f, "f", weight=False)
    g, mg = _load_fn(args.g, "g", weight=False) if args.g else (f, mf)
    ep = _pair(args)
    val = sparse_form(SparseFormSpec(S, ep, args.scale), f, g)
    man = manifest(args, [meta, mf, mg], {"p0": ep.p0, "q0": ep.q0}, f.level)
    return render(args, man, {"form": val}, f"form\n{val!r}\n")


def cmd_sparse_verify(args) -> str:
    from .sparse import verify_sparse
    S, meta = _load_collection(args.collection)
    eta = args.eta if args.eta is not None else S.eta
    wit = verify_sparse(S, eta)
    sets = []
    if wit.ok:
        for q in S.cubes:
            sets.append({"cube": q.to_json(), "measure": str(wit.measures[q]),
                         "E": [[[str(a), str(b)] for a, b in box] for box in wit.boxes(q)]})
    body = {"ok": wit.ok, "eta": eta, "eta_achieved": wit.eta_achieved,
            "carleson": wit.carleson, "canonical": wit.canonical,
            "failing": None if wit.failing is None else wit.failing.to_json(),
            "witness": sets}
    man = manifest(args, [meta])
    return render(args, man, body, f"ok,eta,eta_achieved,carleson\n{wit.ok},{eta!r},"
                                   f"{wit.eta_achieved!r},{wit.carleson!r}\n")


def _witness_path(args) -> str | None:
    if args.witness:
        return args.witness
    if args.out:
        return args.out + ".witness.json"
    return None


def _norm_common(args, est, metas, ep, level, extra) -> str:
    wpath = _witness_path(args)
    if wpath:
        write_atomic(wpath, json.dumps(est.to_json(), indent=2, sort_keys=True) + "\n")
        print(f"witness: {wpath}", file=sys.stderr)
    body = {"estimate": est.value, "verified": est.verified, "evaluations": est.evaluations,
            "witness_path": wpath, **extra}
    man = manifest(args, metas, {"p0": ep.p0, "q0": ep.q0, **extra}, level)
    return render(args, man, body, f"estimate,verified,evaluations\n{est.value!r},"
                                   f"{est.verified!r},{est.evaluations}\n")


def cmd_sparse_norm(args) -> str:
    from .sparse import SparseFormSpec, strong_norm_estimate
    S, meta = _load_collection(args.collection)
    w, mw = _load_fn(args.weight, "weight", weight=True)
    ep = _pair(args)
    est = strong_norm_estimate(SparseFormSpec(S, ep, args.scale), args.p, w, args.budget, args.seed)
    return _norm_common(args, est, [meta, mw], ep, w.level, {"p": args.p})


def cmd_sparse_weak(args) -> str:
    from .sparse import SparseFormSpec, weak_norm_estimate
    S, meta = _load_collection(args.collection)
    w, mw = _load_fn(args.weight, "weight", weight=True)
    ep = _pair(args)
    est = weak_norm_estimate(SparseFormSpec(S, ep, args.scale), ep.p0, w, args.budget, args.seed)
    return _norm_common(args, est, [meta, mw], ep, w.level, {})


def _family(args):
    from .lab import power_family, random_a1_family, two_step_family
    if args.family == "power":
        return power_family(args.deltas, args.level)
    if args.family == "two-step":
        return two_step_family(args.level, args.deltas if args.deltas != DEFAULT_DELTAS else (2.0,))
    return random_a1_family(args.count, args.level, args.seed)


def _lab_collection(args):
    from .grid import Cube, GridShift
    from .sparse import SparseCollection, full_tree, maximal_family
    if args.sparse:
        S, meta = _load_collection(args.sparse)
        return S, [meta]
    if args.collection == "single":
        return SparseCollection([Cube(GridShift.standard(1), 0, (0,))]), []
    if args.collection == "full-tree":
        return full_tree(args.level), []
    return maximal_family(args.level), []


def _lab_spec(args):
    from .sparse import SparseFormSpec
    S, metas = _lab_collection(args)
    return SparseFormSpec(S, _pair(args), args.scale), metas


def _check_shape(args, rep) -> str:
    man = manifest(args, args._metas, {"p0": args.p0, "q0": args.q0, "p": args.p}, args.level)
    text = render(args, man, rep.to_json(), rep.to_csv())
    if not rep.passed:
        bad = "; ".join(f"delta={r.label!r} ratio={r.ratio!r}" for r in rep.violations)
        raise AssertionFailed(f"theorem-shape violation ({rep.kind}): {bad}", text)
    return text


def cmd_lab_thm11(args) -> str:
    from .calibration import load_calibration
    from .lab import verify_thm11
    spec, args._metas = _lab_spec(args)
    p = args.p if args.p is not None else _midpoint(spec.exponents)
    args.p = p
    rep = verify_thm11(spec, p, _family(args), load_calibration()["c_T"], args.budget,
                       args.seed, args.jobs)
    return _check_shape(args, rep)


def cmd_lab_thm12(args) -> str:
    from .calibration import load_calibration
    from .lab import verify_thm12
    spec, args._metas = _lab_spec(args)
    rep = verify_thm12(spec, _family(args), load_calibration()["c_T"], args.budget, args.seed,
                       args.jobs)
    return _check_shape(args, rep)


def cmd_lab_dual(args) -> str:
    from .calibration import load_calibration
    from .lab import verify_dual
    spec, args._metas = _lab_spec(args)
    rep = verify_dual(spec, _family(args), load_calibration()["c_dual"], args.budget, args.seed,
                      args.jobs)
    return _check_shape(args, rep)


def _midpoint(ep) -> float:
    """Midpoint of ``(p0, q0)``; for ``q0 = inf`` the point ``2 p0``."""
    return 2 * ep.p0 if ep.q0 == inf else (ep.p0 + ep.q0) / 2


def cmd_lab_exponents(args) -> str:
    from .lab import estimate_endpoint_exponents
    spec, metas = _lab_spec(args)
    ep = spec.exponents
    fit = estimate_endpoint_exponents(spec, args.p_low, args.p_high, args.level, args.budget,
                                      args.seed, args.jobs)
    a_ok, g_ok = fit.ceilings(ep)
    body = fit.to_json()
    body.update({"alpha_ceiling": 1 / ep.p0 + 0.1, "gamma_ceiling": 1 / ep.q0c + 0.1,
                 "alpha_ok": a_ok, "gamma_ok": g_ok})
    man = manifest(args, metas, {"p0": ep.p0, "q0": ep.q0}, args.level)
    csv_text = ("alpha_hat,gamma_hat,alpha_ok,gamma_ok\n"
                f"{fit.alpha!r},{fit.gamma!r},{a_ok},{g_ok}\n")
    text = render(args, man, body, csv_text)
    if not (a_ok and g_ok):
        raise AssertionFailed(f"endpoint ceiling violated: alpha={fit.alpha!r} gamma={fit.gamma!r}",
                              text)
    return text


def cmd_lab_optimality(args) -> str:
    from .lab import estimate_endpoint_exponents, optimality_report
    spec, metas = _lab_spec(args)
    ep = spec.exponents
    p = args.p if args.p is not None else _midpoint(ep)
    endpoint = None
    if args.p_low and args.p_high:
        endpoint = estimate_endpoint_exponents(spec, args.p_low, args.p_high, args.level,
                                               args.budget, args.seed, args.jobs)
    rep = optimality_report(spec, p, _family(args), endpoint, args.budget, args.seed,
                            args.tolerance, args.jobs)
    man = manifest(args, metas, {"p0": ep.p0, "q0": ep.q0, "p": p}, args.level)
    return render(args, man, rep.to_json(), rep.to_csv())


# parser ----------------------------------------------------------------------------

DEFAULT_DELTAS = [1, 0.5, 0.25, 0.125, 0.0625, 0.03125]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_PARSE)


def _common(p, seed_required: bool = False, budget: int | None = None):
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="write the report here (atomically) instead of stdout")
    p.add_argument("--timestamp", help="timestamp recorded in the manifest "
                                       "(default: SOURCE_DATE_EPOCH, else none)")
    if seed_required:
        p.add_argument("--seed", type=int, required=True)
    if budget is not None:
        p.add_argument("--budget", type=int, default=budget)


def _exps(p, p_needed: bool = False):
    p.add_argument("--p0", type=_real, default=1.0)
    p.add_argument("--q0", type=_real, default=inf)
    p.add_argument("--scale", type=_real, default=1.0, help="form constant c")
    if p_needed:
        p.add_argument("--p", type=_real, required=True)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hxlab", description="Dyadic weights, maximal functions, "
                                           "decompositions and sparse forms on lattices.")
    ap.add_argument("--version", action="version", version=f"hxlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("constants", help="A_p, Wilson A_inf and RH_s of a weight")
    c.add_argument("input")
    c.add_argument("--p", type=_real, action="append")
    c.add_argument("--s", type=_real, action="append")
    c.add_argument("--family", choices=("dyadic", "all-shifts"), default="dyadic")
    _common(c)
    c.set_defaults(fn=cmd_constants, command_path="constants")

    d = sub.add_parser("decompose", help="Calderon-Zygmund decomposition of a function")
    d.add_argument("input")
    d.add_argument("--lambda", dest="lam", type=_real, required=True)
    d.add_argument("--mode", choices=("bounded", "unbounded"), default="bounded")
    _common(d)
    d.set_defaults(fn=cmd_decompose, command_path="decompose")

    s = sub.add_parser("sparse", help="sparse collections and forms")
    ss = s.add_subparsers(dest="sub", required=True, parser_class=_Parser)
    f = ss.add_parser("form")
    f.add_argument("collection")
    f.add_argument("--f", required=True)
    f.add_argument("--g")
    _exps(f)
    _common(f)
    f.set_defaults(fn=cmd_sparse_form, command_path="sparse form")
    v = ss.add_parser("verify")
    v.add_argument("collection")
    v.add_argument("--eta", type=_real)
    _common(v)
    v.set_defaults(fn=cmd_sparse_verify, command_path="sparse verify")
    for name, fn, need_p in (("norm", cmd_sparse_norm, True), ("weak-norm", cmd_sparse_weak, False)):
        n = ss.add_parser(name)
        n.add_argument("collection")
        n.add_argument("--weight", required=True)
        n.add_argument("--witness", help="path for the witness JSON")
        _exps(n, need_p)
        _common(n, seed_required=True, budget=2000)
        n.set_defaults(fn=fn, command_path=f"sparse {name}")

    lab = sub.add_parser("lab", help="bound-shape checks and exponent fits")
    ls = lab.add_subparsers(dest="sub", required=True, parser_class=_Parser)
    for name, fn in (("thm11", cmd_lab_thm11), ("thm12", cmd_lab_thm12), ("dual", cmd_lab_dual),
                     ("exponents", cmd_lab_exponents), ("optimality", cmd_lab_optimality)):
        x = ls.add_parser(name)
        x.add_argument("--family", choices=("power", "two-step", "random-A1"), default="power")
        x.add_argument("--deltas", type=_reals, default=DEFAULT_DELTAS)
        x.add_argument("--count", type=int, default=4, help="random-A1 family size")
        x.add_argument("--level", type=int, default=10)
        x.add_argument("--collection", choices=("maximal", "single", "full-tree"),
                       default="maximal")
        x.add_argument("--sparse", help="sparse-collection JSON (overrides --collection)")
        x.add_argument("--jobs", type=int, default=1)
        _exps(x)
        if name in ("thm11", "optimality"):
            x.add_argument("--p", type=_real)
        else:
            x.set_defaults(p=None)
        if name in ("exponents", "optimality"):
            x.add_argument("--p-low", type=_reals, default=[] if name == "optimality"
                           else [1.5, 1.35, 1.25, 1.18, 1.12])
            x.add_argument("--p-high", type=_reals, default=[] if name == "optimality"
                           else [3.0, 4.0, 6.0, 8.0, 12.0])
        if name == "optimality":
            x.add_argument("--tolerance", type=_real, default=0.2)
        _common(x, seed_required=True, budget=2000 if name != "dual" else 500)
        x.set_defaults(fn=fn, command_path=f"lab {name}")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        text = args.fn(args)
    except ParseError as exc:
        print(f"hxlab: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except AssertionFailed as exc:
        print(f"hxlab: {exc}", file=sys.stderr)
        emit(args, exc.body)
        return EXIT_ASSERT
    except (DomainError, LatticeMismatch, HxlabError, ValueError) as exc:
        print(f"hxlab: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    emit(args, text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line front end: JSON problem files in, JSON certificates and CSV out.

Exit codes: 0 exists / success, 1 not exists, 2 inconclusive, 64 usage error,
65 invalid input, 70 numeric failure.  Errors are reported as JSON on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
import warnings
from dataclasses import replace
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import _linalg as la
from .criterion import Verdict, analyze, necessity_probe
from .errors import FanoWarning, InputError, MabuchiError, NumericError
from .extremal import futaki, orthogonality_residuals
from .geom import build_polytope
from .rootsys import build_root_datum

log = logging.getLogger("mabuchi")

EXIT_OK = 0
EXIT_NOT_EXISTS = 1
EXIT_INCONCLUSIVE = 2
EXIT_USAGE = 64
EXIT_INPUT = 65
EXIT_NUMERIC = 70

FORMAT_VERSIONS = (1,)
VERDICT_CODES = {
    Verdict.EXISTS: ("exists", EXIT_OK),
    Verdict.NOT_EXISTS: ("not_exists", EXIT_NOT_EXISTS),
    Verdict.INCONCLUSIVE: ("inconclusive", EXIT_INCONCLUSIVE),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# numbers


def parse_number(x, rational: bool):
    """JSON scalar to int / Fraction / float; strings "p/q" are exact."""
    if isinstance(x, bool):
        raise InputError(f"expected a number, got {x!r}")
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        return Fraction(str(x)) if rational else x
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"cannot parse number {x!r}") from exc
    raise InputError(f"expected a number, got {x!r}")


def _numbers(obj, rational: bool):
    if isinstance(obj, list):
        return [_numbers(v, rational) for v in obj]
    return parse_number(obj, rational)


def num_out(x) -> dict:
    """A number as {"decimal", "rational"}; rational is null for floats."""
    if isinstance(x, (int, Fraction)) and not isinstance(x, bool):
        q = Fraction(x)
        return {"decimal": repr(float(q)), "rational": str(q)}
    return {"decimal": repr(float(x)), "rational": None}


def num_in(d):
    """Inverse of :func:`num_out`."""
    return Fraction(d["rational"]) if d.get("rational") is not None else float(d["decimal"])


def _vec_out(v) -> list:
    return [num_out(x) for x in v]


# ---------------------------------------------------------------------------
# problem files


def schema(name: str) -> dict:
    return json.loads(resources.files("mabuchi").joinpath("schemas", f"{name}.schema.json").read_text())


def _validate(doc, name: str) -> None:
    import jsonschema

    try:
        jsonschema.validate(doc, schema(name))
    except jsonschema.ValidationError as exc:
        raise InputError(f"{name} file: {exc.message}") from exc


def load_problem(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    _validate(doc, "problem")
    if doc["format_version"] not in FORMAT_VERSIONS:
        raise InputError(f"unsupported format_version {doc['format_version']}")
    return doc


def problem_hash(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def build_instance(doc: dict, rational: bool, tol: float | None):
    rd = doc["root_datum"]
    if "type" in rd:
        datum = build_root_datum(rd["type"])
    else:
        spec = {"simple_roots": _numbers(rd.get("simple_roots", []), True)}
        if "gram" in rd:
            spec["gram"] = _numbers(rd["gram"], True)
        if "rank" in rd:
            spec["rank"] = rd["rank"]
        datum = build_root_datum(spec)
    hs = []
    for h in doc["polytope"]["halfspaces"]:
        hs.append((_numbers(h["normal"], rational), parse_number(h["offset"], rational)))
    exact = la.is_exact([list(n) + [c] for n, c in hs])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", FanoWarning)
        poly = build_polytope(hs, datum, exact=exact)
    for w in caught:
        log.warning("%s", w.message)
    opts = doc.get("options", {})
    if tol is None and "tol" in opts:
        tol = float(opts["tol"])
    return analyze(datum, poly, tol)


# ---------------------------------------------------------------------------
# outputs


def certificate_doc(inst, doc: dict, reproducible: bool) -> dict:
    cert = inst.certificate
    ext = inst.extremal
    verdict, _ = VERDICT_CODES[cert.verdict]
    out = {
        "format_version": 1,
        "input_sha256": problem_hash(doc),
        "verdict": verdict,
        "annotation": cert.annotation,
        "exact": cert.exact,
        "tol": cert.tol,
        "fano_flag": cert.fano_flag,
        "V": num_out(inst.table.V),
        "b": _vec_out(inst.table.b),
        "b_X": _vec_out(cert.b_X),
        "four_rho": _vec_out(tuple(4 * x for x in inst.datum.rho)),
        "shift": _vec_out(cert.shift),
        "cone": {
            "kind": cert.cone.kind.value,
            "coeffs": _vec_out(cert.cone.coeffs),
            "residual": _vec_out(cert.cone.residual),
        },
        "c_X": num_out(cert.c_X),
        "C_X": num_out(cert.C_X),
        "X": _vec_out(ext.X),
        "a_matrix": [_vec_out(row) for row in ext.a_matrix],
        "margins": {k: (None if v is None else num_out(v)) for k, v in cert.margins.items()},
    }
    if not reproducible:
        out["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return out


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def load_potential_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """CSV rows (y_1, ..., y_r, value); a header row is skipped."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    rows = []
    for row in csv.reader(io.StringIO(text)):
        if not row or row[0].strip().startswith("#"):
            continue
        try:
            rows.append([float(v) for v in row])
        except ValueError:
            if rows:
                raise InputError(f"non-numeric row in {path}: {row}") from None
    if not rows or len({len(r) for r in rows}) != 1 or len(rows[0]) < 2:
        raise InputError(f"{path}: expected rows y_1..y_r,value")
    arr = np.array(rows)
    return arr[:, :-1], arr[:, -1]


def potential_on_mesh(disc, pts: np.ndarray, vals: np.ndarray):
    """Interpolate support-point data onto the mesh nodes.

    Points may be given anywhere in 2P; they are folded into the chamber by
    the Weyl group, so data on the fundamental domain is W-expanded for free.
    """
    from .dingfun import mesh_from_points

    if pts.shape[1] != disc.rank:
        raise InputError(f"potential has {pts.shape[1]} coordinates, rank is {disc.rank}")
    walls = np.array([[float(x) for x in a] for a in disc.datum.simple_roots]).reshape(-1, disc.rank)
    G = np.array([[float(x) for x in row] for row in disc.datum.gram])
    folded = []
    for p in pts:
        cands = [w @ p for w in disc.weyl]
        inside = [c for c in cands if np.all(walls @ G @ c >= -1e-12)] if len(walls) else cands
        folded.append(inside[0] if inside else p)
    folded = np.array(folded)
    # keep one value per distinct folded point
    key = {tuple(np.round(p, 12)): v for p, v in zip(folded, vals)}
    fp = np.array(list(key)).reshape(-1, disc.rank)
    fv = np.array(list(key.values()))
    src = mesh_from_points(fp)
    out = np.empty(disc.mesh.size)
    for j, y in enumerate(disc.mesh.nodes):
        try:
            out[j] = src.interpolation_weights(y) @ fv
        except MabuchiError:
            raise InputError(f"mesh node {tuple(y)} lies outside the support points of the potential") from None
    return disc.potential(out)


def write_potential_csv(u, path: str) -> None:
    r = u.disc.rank
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"y{i + 1}" for i in range(r)] + ["value"])
        for y, v in zip(u.disc.mesh.nodes, u.values):
            w.writerow([repr(float(c)) for c in y] + [repr(float(v))])


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(args, doc, inst):
    _emit(certificate_doc(inst, doc, args.reproducible), args.out)
    return VERDICT_CODES[inst.certificate.verdict][1]


def cmd_extremal(args, doc, inst):
    ext = inst.extremal
    res = orthogonality_residuals(inst.datum, inst.table, ext)
    _emit(
        {
            "X": _vec_out(ext.X),
            "theta_slope": _vec_out(ext.slope),
            "theta_const": num_out(ext.const),
            "c_X": num_out(ext.c_X),
            "C_X": num_out(ext.C_X),
            "a_matrix": [_vec_out(row) for row in ext.a_matrix],
            "rhs": _vec_out(ext.rhs),
            "orthogonality_residuals": _vec_out(res),
        },
        args.out,
    )
    return EXIT_OK


def _parse_vector(text: str, rational: bool) -> list:
    text = text.strip()
    if text.startswith("["):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"cannot parse vector {text!r}") from exc
    else:
        raw = [t for t in text.split(",") if t.strip()]
        raw = [t if "/" in t else (int(t) if t.strip().lstrip("-").isdigit() else float(t)) for t in raw]
    return [parse_number(x, rational) for x in raw]


def cmd_futaki(args, doc, inst):
    Y = _parse_vector(args.y, args.rational)
    value = futaki(inst.datum, inst.table, Y, tol=args.tol or 1e-9)
    _emit({"Y": _vec_out(Y), "futaki": num_out(value)}, args.out)
    return EXIT_OK


def _discretize(inst, doc, level=None):
    from .dingfun import FConfig, discretize

    q = doc.get("options", {}).get("quadrature", {})
    fcfg = FConfig(R=q.get("R"), tail_tol=q.get("tail_tol", 1e-12))
    return discretize(inst, level=level if level is not None else q.get("level"), fcfg=fcfg)


def cmd_ding(args, doc, inst):
    from .dingfun import eval_F_full, eval_L

    disc = _discretize(inst, doc, args.level)
    pts, vals = load_potential_csv(args.potential)
    u = potential_on_mesh(disc, pts, vals)
    fr = eval_F_full(u)
    L = eval_L(u)
    _emit(
        {
            "L": L,
            "F": fr.F,
            "D": L + fr.F,
            "log_Z": fr.log_Z,
            "R": fr.R,
            "decay": fr.delta,
            "tail_bound": fr.tail,
            "mesh_nodes": int(disc.mesh.size),
        },
        args.out,
    )
    return EXIT_OK


def _solver_config(doc, path: str | None):
    from .dingfun import FConfig
    from .masolver import SolverConfig

    raw = dict(doc.get("options", {}).get("solver", {}))
    if path:
        try:
            raw.update(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read solver config {path}: {exc}") from exc
    allowed = {"resolution", "max_iter", "gtol", "divergence_factor", "window", "window_decrease"}
    bad = set(raw) - allowed
    if bad:
        raise InputError(f"unknown solver options {sorted(bad)}")
    q = doc.get("options", {}).get("quadrature", {})
    cfg = SolverConfig(**raw)
    return replace(cfg, fcfg=FConfig(R=q.get("R"), tail_tol=q.get("tail_tol", 1e-12)))


def cmd_solve(args, doc, inst):
    from .masolver import Status, solve

    cfg = _solver_config(doc, args.config)
    disc = _discretize(inst, doc, cfg.resolution)
    sol = solve(disc, cfg)
    if args.history:
        Path(args.history).write_text(sol.history_csv())
    if args.potential_out and sol.potential is not None:
        write_potential_csv(sol.potential, args.potential_out)
    _emit(
        {
            "status": sol.status.value,
            "reason": sol.reason,
            "D": None if not np.isfinite(sol.D) else sol.D,
            "iterations": len(sol.history),
            "stationarity": None if not np.isfinite(sol.stationarity) else sol.stationarity,
            "pushforward": None if not np.isfinite(sol.pushforward) else sol.pushforward,
            "mesh_nodes": int(disc.mesh.size),
            "verdict": VERDICT_CODES[inst.certificate.verdict][0],
        },
        args.out,
    )
    return {Status.CONVERGED: EXIT_OK, Status.DIVERGED: EXIT_NOT_EXISTS, Status.MAX_ITER: EXIT_INCONCLUSIVE}[sol.status]


def cmd_probe(args, doc, inst):
    res = necessity_probe(inst.certificate, inst.datum, count=args.rays, seed=args.seed, tol=args.tol)
    _emit(
        {
            "rays": [list(r) for r in res.rays],
            "pairings": list(res.pairings),
            "consistent": res.consistent,
            "note": res.note,
            "verdict": VERDICT_CODES[inst.certificate.verdict][0],
        },
        args.out,
    )
    return EXIT_OK if res.consistent else EXIT_NUMERIC


def cmd_oracle(args, doc, inst):
    from .quad import DensityPoly, mc_moments

    region = inst.polytope.chamber
    pi = inst.pi
    pi_f = DensityPoly({e: float(c) for e, c in pi.terms.items()}, pi.nvars)
    plain = mc_moments(pi_f, region, args.seed, args.samples)
    ext = inst.extremal
    r = pi.nvars
    terms = {(0,) * r: 1.0 - float(ext.const)}
    for i, s in enumerate(ext.slope):
        e = [0] * r
        e[i] = 1
        terms[tuple(e)] = terms.get(tuple(e), 0.0) - float(s)
    weighted = mc_moments(pi_f, region, args.seed, args.samples, weight=DensityPoly(terms, r))
    exact_b = [float(x) for x in inst.table.b]
    exact_bX = [float(x) for x in inst.certificate.b_X]

    def z(est, err, ref):
        return abs(est - ref) / err if err > 0 else (0.0 if est == ref else float("inf"))

    zs = [z(plain.V, plain.V_stderr, float(inst.table.V))]
    zs += [z(e, s, ref) for e, s, ref in zip(plain.b, plain.b_stderr, exact_b)]
    zs += [z(e, s, ref) for e, s, ref in zip(weighted.b, weighted.b_stderr, exact_bX)]
    _emit(
        {
            "samples": args.samples,
            "seed": args.seed,
            "V": {"estimate": plain.V, "stderr": plain.V_stderr, "exact": float(inst.table.V)},
            "b": {"estimate": list(plain.b), "stderr": list(plain.b_stderr), "exact": exact_b},
            "b_X": {"estimate": list(weighted.b), "stderr": list(weighted.b_stderr), "exact": exact_bX},
            "max_z": max(zs),
            "agree_3sigma": max(zs) <= 3.0,
        },
        args.out,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="floating-point margin (default 1e-9; 0 in rational mode)")
    common.add_argument("--rational", action="store_true", help="read decimal inputs as exact rationals")
    common.add_argument("--reproducible", action="store_true", help="suppress timestamps")
    common.add_argument("--out", default=None, help="write JSON here instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="mabuchi", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("problem")
        sp.set_defaults(fn=fn)
        return sp

    add("check", cmd_check, "existence certificate")
    add("extremal", cmd_extremal, "extremal field and theta range")
    sp = add("futaki", cmd_futaki, "Futaki invariant along a central direction")
    sp.add_argument("--y", required=True, help='vector, e.g. "1,0" or "[\\"1/2\\", 0]"')

    ding = sub.add_parser("ding", parents=[common], help="functional evaluation")
    dsub = ding.add_subparsers(dest="ding_command", required=True, parser_class=_Parser)
    ev = dsub.add_parser("eval", parents=[common], help="L, F and D of a potential")
    ev.add_argument("problem")
    ev.add_argument("--potential", required=True, help="CSV y_1..y_r,value")
    ev.add_argument("--level", type=int, default=None, help="mesh refinement level")
    ev.set_defaults(fn=cmd_ding)

    sp = add("solve", cmd_solve, "minimise the functional")
    sp.add_argument("--config", default=None, help="JSON solver options")
    sp.add_argument("--history", default=None, help="write the iterate history CSV here")
    sp.add_argument("--potential-out", default=None, help="write the final potential CSV here")

    sp = add("probe", cmd_probe, "pair the shift with chamber rays")
    sp.add_argument("--rays", type=int, default=16)
    sp.add_argument("--seed", type=int, default=0)

    oracle = sub.add_parser("oracle", parents=[common], help="independent checks")
    osub = oracle.add_subparsers(dest="oracle_command", required=True, parser_class=_Parser)
    mc = osub.add_parser("mc", parents=[common], help="Monte Carlo moments")
    mc.add_argument("problem")
    mc.add_argument("--samples", type=int, default=1_000_000)
    mc.add_argument("--seed", type=int, default=0)
    mc.set_defaults(fn=cmd_oracle)
    return p


def _fail(code: int, payload: dict) -> int:
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, {"error": "usage", "message": str(exc)})
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.tol is not None and args.tol < 0:
        return _fail(EXIT_USAGE, {"error": "usage", "message": "--tol must be nonnegative"})
    try:
        doc = load_problem(args.problem)
        inst = build_instance(doc, args.rational, args.tol)
        return args.fn(args, doc, inst)
    except InputError as exc:
        return _fail(EXIT_INPUT, exc.payload() if isinstance(exc, MabuchiError) else {"error": "input_invalid", "message": str(exc)})
    except NumericError as exc:
        return _fail(EXIT_NUMERIC, exc.payload())
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, {"error": "numeric_failure", "message": str(exc)})


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

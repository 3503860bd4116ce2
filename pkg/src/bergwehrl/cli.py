"""Command-line front end.

    bergwehrl verify {wehrl,mixture,faber-krahn,pointwise,identities} [options]
    bergwehrl extremize [options]
    bergwehrl table {rhs,j,entropy-bound} [options]

Exit status: 0 success, 1 a check was violated (or the optimizer's gates failed),
2 usage error (including alpha <= N), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from typing import Sequence

import numpy as np

from . import __version__
from .bounds import (CheckReport, EuclideanAnnulus, GeodesicBall, Superlevel, check_faber_krahn,
                     check_mixture, check_pointwise, check_wehrl, closed_form_identities)
from .extremize import GradientCheckError, SaaProblem, saa_maximize
from .geometry import Point
from .probes import ConvexProbe
from .quadrature import (DivergenceError, IntegrationError, McConfig, entropy_lower_bound, j_value,
                         theorem_a_rhs)
from .space import (CoherentState, Function, MixedState, SpaceParams, from_document, random_mixed,
                    random_poly)

log = logging.getLogger("bergwehrl")

EXIT_OK, EXIT_VIOLATED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULT_VERIFY_SAMPLES = 200_000
DEFAULT_SAA_SAMPLES = 8_000
SAA_ORBIT = 16
STRATA = 64


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run; embedded verbatim in its report."""

    command: str
    subject: str | None
    n: int
    alpha: float | None
    k: int | None
    probe: str
    fn: str | None
    set: str | None
    s: str | None
    seed: int
    n_samples: int | None
    degree: int
    restarts: int
    out: str | None
    format: str

    def params(self) -> SpaceParams:
        if self.k is not None:
            return SpaceParams.from_k(self.n, self.k)
        return SpaceParams(self.n, float(self.alpha))

    def to_dict(self) -> dict:
        return asdict(self)


# --- argument parsing ------------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, probe_default: str = "power:2") -> None:
    p.add_argument("--n", type=int, default=1, help="complex dimension N (default 1)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--alpha", type=str, default=None, help="weight alpha > N (default 2); tables accept a comma list")
    g.add_argument("--k", type=int, default=None, help="use alpha = (N+1) k")
    p.add_argument("--probe", default=probe_default, help="power:<p>, hinge:<t> or xlogx")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=None, help="Monte Carlo sample count")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bergwehrl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run one inequality check")
    v.add_argument("subject", choices=("wehrl", "mixture", "faber-krahn", "pointwise", "identities"))
    _add_common(v)
    v.add_argument("--fn", default="coherent:0",
                   help="coherent:<z0 comps>, poly:<json path>, random:<degree>:<seed>, mixed:<rank>:<degree>:<seed>")
    v.add_argument("--set", default="ball:1", dest="set_spec",
                   help="ball:<s>[:<center comps>], annulus:<r1>:<r2>, superlevel:<t>")

    e = sub.add_parser("extremize", help="search for maximizers of int Phi(u_f) dm")
    _add_common(e)
    e.add_argument("--degree", type=int, default=6)
    e.add_argument("--restarts", type=int, default=5)
    e.add_argument("--trace", action="store_true", help="include iteration traces in the report")

    t = sub.add_parser("table", help="print deterministic sharp constants")
    t.add_argument("what", choices=("rhs", "j", "entropy-bound"))
    _add_common(t)
    t.add_argument("--s", default="0.1,0.5,1,2,5,10", help="comma list of measures for 'table j'")
    return parser


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _complexes(text: str) -> list[complex]:
    try:
        return [complex(x.replace(" ", "")) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated complex numbers, got {text!r}") from None


def parse_function(spec: str, params: SpaceParams) -> Function:
    head, _, tail = spec.partition(":")
    if head == "coherent":
        z0 = _complexes(tail) if tail else [0j] * params.n
        if len(z0) == 1 and params.n > 1 and z0[0] == 0:
            z0 = [0j] * params.n
        if len(z0) != params.n:
            raise UsageError(f"coherent center needs {params.n} components, got {len(z0)}")
        return CoherentState(params, Point(z0))
    if head == "poly":
        with open(tail, encoding="utf-8") as fh:
            f = from_document(json.load(fh))
        if f.params != params:
            raise UsageError(f"function file is for {f.params}, run is for {params}")
        return f
    if head == "random":
        deg, _, seed = tail.partition(":")
        return random_poly(params, int(deg), np.random.default_rng(int(seed or 0)))
    if head == "mixed":
        parts = tail.split(":")
        if len(parts) != 3:
            raise UsageError("mixed spec is mixed:<rank>:<degree>:<seed>")
        rank, deg, seed = (int(x) for x in parts)
        return random_mixed(params, rank, deg, np.random.default_rng(seed))
    raise UsageError(f"unknown function spec {spec!r}")


def parse_set(spec: str, params: SpaceParams, f: Function):
    head, _, tail = spec.partition(":")
    if head == "ball":
        s_text, _, center = tail.partition(":")
        z = _complexes(center) if center else [0j] * params.n
        if len(z) != params.n:
            raise UsageError(f"ball center needs {params.n} components")
        return GeodesicBall(Point(z), float(s_text))
    if head == "annulus":
        r1, _, r2 = tail.partition(":")
        return EuclideanAnnulus(float(r1), float(r2))
    if head == "superlevel":
        return Superlevel(f, float(tail))
    raise UsageError(f"unknown set spec {spec!r}")


# --- output ----------------------------------------------------------------------------------------


def write_atomic(path: str | None, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename; stdout when ``path`` is None."""
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".bergwehrl-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _document(rc: RunConfig, report: dict) -> str:
    doc = {"run_config": rc.to_dict(), "report": report,
           "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _rows_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _check_csv(reports: Sequence[CheckReport]) -> str:
    header = ["check", "n", "alpha", "probe", "lhs", "stderr", "rhs", "margin", "sigmas", "verdict", "seed"]
    rows = [[r.check, r.params.n, repr(r.params.alpha), r.probe or "", repr(r.lhs.mean), repr(r.lhs.stderr),
             repr(r.rhs), repr(r.margin), "" if r.sigmas is None else repr(r.sigmas), r.verdict, r.seed]
            for r in reports]
    return _rows_csv(header, rows)


# --- commands --------------------------------------------------------------------------------------


def cmd_verify(rc: RunConfig) -> int:
    params = rc.params()
    cfg = McConfig(rc.n_samples or DEFAULT_VERIFY_SAMPLES, rc.seed, strata=STRATA)
    if rc.subject == "identities":
        rows = closed_form_identities(params)
        failed = [r["name"] for r in rows if not r["ok"]]
        if rc.format == "csv":
            text = _rows_csv(["name", "value", "expected", "error", "tol", "ok"],
                             [[r["name"], repr(r["value"]), repr(r["expected"]), repr(r["error"]), repr(r["tol"]),
                               r["ok"]] for r in rows])
        else:
            text = _document(rc, {"check": "identities", "params": params.to_dict(), "rows": rows,
                                  "all_ok": not failed})
        write_atomic(rc.out, text)
        for name in failed:
            log.error("identity failed: %s", name)
        return EXIT_VIOLATED if failed else EXIT_OK

    probe = ConvexProbe.parse(rc.probe)
    f = parse_function(rc.fn or "coherent:0", params)
    if rc.subject == "wehrl":
        if isinstance(f, MixedState):
            raise UsageError("verify wehrl takes a pure state; use verify mixture")
        report = check_wehrl(f, probe, cfg)
    elif rc.subject == "mixture":
        report = check_mixture(f, probe, cfg)
    elif rc.subject == "faber-krahn":
        if isinstance(f, MixedState):
            raise UsageError("verify faber-krahn takes a pure state")
        report = check_faber_krahn(f, parse_set(rc.set or "ball:1", params, f), cfg)
    else:
        report = check_pointwise(f, rc.n_samples or 20_000, cfg)
    text = _check_csv([report]) if rc.format == "csv" else _document(rc, report.to_dict())
    write_atomic(rc.out, text)
    log.info("%s: lhs=%.6g rhs=%.6g verdict=%s", report.check, report.lhs.mean, report.rhs, report.verdict)
    return EXIT_VIOLATED if report.violated else EXIT_OK


def cmd_extremize(rc: RunConfig, trace: bool = False) -> int:
    params = rc.params()
    probe = ConvexProbe.parse(rc.probe)
    cfg = McConfig(rc.n_samples or DEFAULT_SAA_SAMPLES, rc.seed, strata=STRATA, orbit=SAA_ORBIT)
    problem = SaaProblem(params, probe, rc.degree, cfg)
    report = saa_maximize(problem, restarts=rc.restarts, seed=rc.seed, trace=trace)
    if rc.format == "csv":
        header = ["restart", "kind", "status", "iterations", "grad_norm", "grad_check", "saa", "saa_stderr",
                  "fresh", "fresh_stderr"]
        rows = [[r["index"], r["kind"], r["status"], r["iterations"], repr(r["grad_norm"]), repr(r["grad_check"]),
                 repr(r["saa"]["mean"]), repr(r["saa"]["stderr"]), repr(r["fresh"]["mean"]),
                 repr(r["fresh"]["stderr"])] for r in report.restarts]
        text = _rows_csv(header, rows)
    else:
        text = _document(rc, report.to_dict(include_trace=trace))
    write_atomic(rc.out, text)
    log.info("best fresh value %.6g (rhs %.6g), overlap %.4f", report.fresh_value.mean, report.rhs,
             report.diagnostic["overlap"])
    return EXIT_OK if report.gradient_gate_ok and report.bound_ok else EXIT_VIOLATED


def cmd_table(rc: RunConfig) -> int:
    alphas = _floats(rc.alpha) if rc.alpha is not None else None
    if rc.k is not None:
        param_list = [SpaceParams.from_k(rc.n, rc.k)]
    else:
        param_list = [SpaceParams(rc.n, a) for a in (alphas or [2.0])]
    rows = []
    if rc.subject == "j":
        for params in param_list:
            for s in _floats(rc.s or "1"):
                rows.append((params, s, j_value(s, params)))
        header = ["s", "value"]
    elif rc.subject == "rhs":
        probe = ConvexProbe.parse(rc.probe)
        rows = [(p, p.alpha, theorem_a_rhs(probe, p)) for p in param_list]
        header = ["alpha", "value"]
    else:
        rows = [(p, p.alpha, entropy_lower_bound(p)) for p in param_list]
        header = ["alpha", "value"]
    multi = len(param_list) > 1 and rc.subject == "j"
    if multi:
        header = ["alpha"] + header
    out = [[*([f"{p.alpha:g}"] if multi else []), f"{x:g}", "%.9f" % v] for p, x, v in rows]
    if rc.format == "json":
        text = json.dumps({"run_config": rc.to_dict(), "table": [dict(zip(header, r)) for r in out]},
                          indent=2, allow_nan=False) + "\n"
    else:
        text = _rows_csv(header, out)
    write_atomic(rc.out, text)
    return EXIT_OK


def _run_config(args: argparse.Namespace) -> RunConfig:
    subject = getattr(args, "subject", None) or getattr(args, "what", None)
    alpha = args.alpha
    if args.command != "table":
        if alpha is not None:
            vals = _floats(alpha)
            if len(vals) != 1:
                raise UsageError("--alpha takes a single value here")
            alpha = vals[0]
        elif args.k is None:
            alpha = 2.0
    fmt = args.format or ("csv" if args.command == "table" else "json")
    return RunConfig(
        command=args.command, subject=subject, n=args.n, alpha=alpha, k=args.k, probe=args.probe,
        fn=getattr(args, "fn", None), set=getattr(args, "set_spec", None), s=getattr(args, "s", None),
        seed=args.seed, n_samples=args.samples, degree=getattr(args, "degree", 0),
        restarts=getattr(args, "restarts", 0), out=args.out, format=fmt,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = _run_config(args)
        if args.command == "verify":
            rc.params()  # rejects alpha <= N before any work
            return cmd_verify(rc)
        if args.command == "extremize":
            rc.params()
            return cmd_extremize(rc, trace=args.trace)
        return cmd_table(rc)
    except (UsageError, ValueError, OSError) as exc:
        print(f"bergwehrl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrationError, DivergenceError, GradientCheckError, FloatingPointError) as exc:
        point = getattr(exc, "point", None)
        where = f" at z={np.asarray(point).tolist()}" if point is not None else ""
        print(f"bergwehrl: numerical failure: {exc}{where}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: ``rlsd {solve,certify,gamma-range,bench}``.

Exit codes
----------
0  success (solve converged / every applicable certificate check passed)
1  input error (missing or malformed file, invalid parameter, missing reference)
2  solve stopped at the iteration limit
3  solve hit a numerical failure
4  a certificate check failed
5  no certificate applies to this gamma/problem (empirical report still written)
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import kernels
from .bench import FAMILIES, BenchSpec, generate
from .bundle import json_dump, read_problem, write_problem
from .diagnostics import (
    DEFAULT_ETA1,
    DEFAULT_ETA2,
    ReferenceSolution,
    certify,
    compute_reference,
)
from .errors import InvalidInputError, MissingReferenceError, NumericalError, RlsdError
from .gamma import GammaRangeParams, admissible_gamma_range, range_to_json
from .solver import SolverConfig, Status, Trace, solve

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_MAX_ITER = 2
EXIT_NUMERICAL = 3
EXIT_CHECK_FAILED = 4
EXIT_UNCERTIFIED = 5

SOLVE_EXIT = {
    Status.CONVERGED: EXIT_OK,
    Status.MAX_ITERATIONS: EXIT_MAX_ITER,
    Status.NUMERICAL_FAILURE: EXIT_NUMERICAL,
}

REFERENCE_CACHE = "reference.json"


@dataclass(frozen=True)
class RunManifest:
    """Everything one solve/certify invocation reads and writes."""

    problem: Path
    gamma: float
    tol: float = 1e-8
    max_iter: int = 10000
    inner_tol: float = 1e-10
    trace: Path | None = None
    summary: Path | None = None
    certificate: Path | None = None
    reference_policy: str = "none"
    reference_path: Path | None = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidInputError("gamma must be positive")
        if self.reference_policy not in ("compute", "load", "none"):
            raise InvalidInputError(f"unknown reference policy {self.reference_policy!r}")
        if self.reference_policy == "load" and self.reference_path is None:
            raise InvalidInputError("loading a reference needs a path")
        paths = [p for p in (self.problem, self.trace, self.summary, self.certificate,
                             self.reference_path) if p is not None]
        resolved = [Path(p).resolve() for p in paths]
        if len(set(resolved)) != len(resolved):
            raise InvalidInputError("input and output paths must be distinct")

    def config(self, record_trace=False):
        return SolverConfig(gamma=self.gamma, max_iter=self.max_iter, tol_kkt=self.tol,
                            inner_tol=self.inner_tol, record_trace=record_trace)


def iterates_path(trace_path):
    return Path(str(trace_path) + ".iterates.npy")


def _err(msg):
    print(f"rlsd: error: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(m: RunManifest, store_iterates=True):
    p = read_problem(m.problem)
    cfg = m.config(record_trace=m.trace is not None)
    res = solve(p, cfg)
    if m.trace is not None:
        res.trace.to_csv(m.trace)
        if store_iterates:
            res.trace.save_iterates(iterates_path(m.trace))
    summary = res.summary(p)
    summary.update({
        "problem": str(m.problem),
        "config": {"gamma": cfg.gamma, "tol_kkt": cfg.tol_kkt, "max_iter": cfg.max_iter,
                   "inner_tol": cfg.inner_tol},
        "trace": None if m.trace is None else str(m.trace),
        "kkt": {"stationarity1": res.kkt.stationarity1, "stationarity2": res.kkt.stationarity2,
                "dual3": res.kkt.dual3, "primal": res.kkt.primal},
        "message": res.message,
    })
    if m.summary is not None:
        json_dump(summary, m.summary)
    if res.status is Status.NUMERICAL_FAILURE:
        _err(f"numerical failure: {res.message}")
    elif res.status is Status.MAX_ITERATIONS:
        _err(f"stopped after {res.iterations} iterations at kkt={res.kkt.max:.3e}")
    print(f"{summary['status']} iterations={summary['iterations']} "
          f"objective={summary['objective']!r} kkt_max={summary['kkt_max']:.3e}")
    return SOLVE_EXIT[res.status]


def _reference_for(m: RunManifest, p):
    if m.reference_policy == "load":
        return ReferenceSolution.load(m.reference_path, p)
    if m.reference_policy == "compute":
        cache = m.reference_path or Path(m.problem).parent / REFERENCE_CACHE
        if Path(cache).exists():
            ref = ReferenceSolution.load(cache, p)
            if ref.kkt_max <= 1e-11:
                return ref
        ref = compute_reference(p)
        ref.save(cache)
        return ref
    return None


def cmd_certify(m: RunManifest, eta1=DEFAULT_ETA1, eta2=DEFAULT_ETA2):
    p = read_problem(m.problem)
    if m.trace is None:
        raise InvalidInputError("certify needs a trace")
    ip = iterates_path(m.trace)
    trace = Trace.from_csv(m.trace, m.gamma, ip if ip.exists() else None)
    cfg = m.config()
    try:
        report = certify(trace, p, cfg, None, eta1=eta1, eta2=eta2)
    except MissingReferenceError:
        if m.reference_policy == "none":
            raise
        report = certify(trace, p, cfg, _reference_for(m, p), eta1=eta1, eta2=eta2)
    if m.certificate is not None:
        json_dump(report.to_json(), m.certificate)
    for c in report.checks:
        mark = "pass" if c.passed else "FAIL"
        print(f"{mark} {c.name} worst={c.worst_violation:.3e} at={c.at_iteration}")
    emp = report.empirical
    print(f"regime={'+'.join(report.regimes)} converged={emp['converged']} "
          f"final_kkt={emp['final_kkt']:.3e}")
    if not report.certified:
        return EXIT_UNCERTIFIED
    if not report.passed:
        _err("failed checks: " + ", ".join(c.name for c in report.failed()))
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_gamma_range(sigma, L, eta1, eta2, output=None):
    params = GammaRangeParams(sigma, L, eta1, eta2)
    rng = admissible_gamma_range(params)
    print(rng.display())
    if output is not None:
        json_dump(range_to_json(params, rng), output)
    return EXIT_OK


def cmd_bench(spec: BenchSpec, out_dir):
    p, truth = generate(spec)
    out_dir = Path(out_dir)
    write_problem(p, out_dir)
    json_dump({
        "family": spec.family,
        "spec": spec.to_json(),
        "truth": {k: v.tolist() for k, v in truth.items()},
    }, out_dir / "truth.json")
    print(str(out_dir / "problem.json"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser():
    ap = argparse.ArgumentParser(prog="rlsd", description="Three-block ADMM for RLSD problems.")
    ap.add_argument("--backend", choices=("cython", "python"),
                    help="kernel backend (default: compiled when available)")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run ADMM on a problem bundle")
    s.add_argument("problem", type=Path)
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--max-iter", type=int, default=10000)
    s.add_argument("--inner-tol", type=float, default=1e-10)
    s.add_argument("--trace", type=Path, default=Path("trace.csv"))
    s.add_argument("--summary", type=Path, default=Path("summary.json"))
    s.add_argument("--no-iterates", action="store_true",
                   help="skip the <trace>.iterates.npy sidecar")

    c = sub.add_parser("certify", help="check convergence certificates on a trace")
    c.add_argument("problem", type=Path)
    c.add_argument("--trace", type=Path, required=True)
    c.add_argument("--gamma", type=float, required=True)
    c.add_argument("--tol", type=float, default=1e-8,
                   help="kkt tolerance for the empirical convergence report")
    c.add_argument("--certificate", type=Path, default=Path("certificate.json"))
    ref = c.add_mutually_exclusive_group()
    ref.add_argument("--reference", type=Path, help="load a reference solution")
    ref.add_argument("--compute-reference", action="store_true",
                     help=f"solve for a reference (cached as {REFERENCE_CACHE} beside the problem)")
    c.add_argument("--eta1", type=float, default=DEFAULT_ETA1)
    c.add_argument("--eta2", type=float, default=DEFAULT_ETA2)

    g = sub.add_parser("gamma-range", help="admissible gamma for a quadratic third block")
    for name in ("sigma", "L", "eta1", "eta2"):
        g.add_argument(name, type=float)
    g.add_argument("--output", type=Path, help="write the range as JSON")

    b = sub.add_parser("bench", help="write a synthetic problem bundle")
    b.add_argument("family", choices=FAMILIES)
    b.add_argument("--m", type=int, default=30)
    b.add_argument("--n", type=int, default=30)
    b.add_argument("--p", type=int, default=20)
    b.add_argument("--rank", type=int, default=2)
    b.add_argument("--sparsity", type=float, default=0.05)
    b.add_argument("--noise", type=float, default=1e-3)
    b.add_argument("--beta1", type=float)
    b.add_argument("--beta2", type=float)
    b.add_argument("--beta", type=float)
    b.add_argument("--density", type=float, default=0.5)
    b.add_argument("--box-lo", type=float, default=0.0)
    b.add_argument("--box-hi", type=float, default=255.0)
    b.add_argument("--raw-gaussian", action="store_true",
                   help="lasso: keep the Gaussian design instead of orthonormalizing it")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", type=Path, help="output directory (default <family>_seed<seed>)")
    return ap


def _dispatch(args):
    if args.command == "solve":
        m = RunManifest(args.problem, args.gamma, args.tol, args.max_iter, args.inner_tol,
                        trace=args.trace, summary=args.summary)
        return cmd_solve(m, store_iterates=not args.no_iterates)
    if args.command == "certify":
        if args.reference is not None:
            policy, rpath = "load", args.reference
        elif args.compute_reference:
            policy, rpath = "compute", None
        else:
            policy, rpath = "none", None
        m = RunManifest(args.problem, args.gamma, args.tol, trace=args.trace,
                        certificate=args.certificate, reference_policy=policy,
                        reference_path=rpath)
        return cmd_certify(m, args.eta1, args.eta2)
    if args.command == "gamma-range":
        return cmd_gamma_range(args.sigma, args.L, args.eta1, args.eta2, args.output)
    spec = BenchSpec(
        family=args.family, m=args.m, n=args.n, p=args.p, rank=args.rank,
        sparsity=args.sparsity, noise=args.noise, beta1=args.beta1, beta2=args.beta2,
        beta=args.beta, density=args.density, box_lo=args.box_lo, box_hi=args.box_hi,
        orthonormal=not args.raw_gaussian, seed=args.seed,
    )
    out = args.out if args.out is not None else Path(f"{args.family}_seed{args.seed}")
    return cmd_bench(spec, out)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.backend is not None:
        kernels.set_backend(args.backend)
    try:
        return _dispatch(args)
    except MissingReferenceError as exc:
        _err(f"{exc}")
        return EXIT_INPUT
    except (InvalidInputError, OSError, json.JSONDecodeError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    except NumericalError as exc:
        _err(f"numerical failure: {exc}")
        return EXIT_NUMERICAL
    except RlsdError as exc:
        _err(str(exc))
        return EXIT_INPUT

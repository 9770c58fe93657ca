"""Runtime certificates for recorded ADMM traces.

The convergence guarantees for three-block ADMM on RLSD problems rest on a
handful of scalar sequences being monotone or bounded. This module evaluates
those sequences on a :class:`~rlsd.solver.Trace` and reports, per check, the
worst violation and where it occurred.

Slack model: an inequality ``lhs <= rhs`` passes at step ``k`` when
``lhs - rhs <= 1e-9 * (1 + |q|)`` with ``q`` the natural magnitude of the
monitored quantity (documented per check).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import (
    InvalidInputError,
    MissingReferenceError,
    NotApplicableError,
    NumericalError,
)
from .gamma import GammaRangeParams, admissible_pieces, canonical_regime_coverage, high_lower
from .problem import RlsdProblem, kkt_residual
from .solver import SolverConfig, Trace, solve

SLACK = 1e-9
IDENTITY_TOL = 1e-10
REFERENCE_TOL = 1e-12
REFERENCE_MAX_KKT = 1e-11
DEFAULT_ETA1 = 3.0
DEFAULT_ETA2 = 4.0
CANONICAL_LOW_EPS = 3.0

ANCHORS = {
    "descent": "augmented Lagrangian sufficient decrease: "
               "L(w^k) - L(w^k+1) >= M (|A1 dx1|^2 + |A2 dx2|^2 + |dx3|^2), "
               "M = min{g/2, (g+s)/2 - L^2/g}",
    "lower_bound": "augmented Lagrangian bounded below by the sum of the block lower bounds",
    "summability": "sum of squared steps <= (L(w^0) - L*) / M",
    "potential_mid": "Phi^k = |lam-lam*|^2/(2g) + g/2 |A2x2-A2x2*|^2 + g/2 |x3-x3*|^2 "
                     "is non-increasing",
    "potential_low": "Phi^k + (g eps/2) |x3^k - x3^k-1|^2 is non-increasing for k >= 1",
    "identity_x3_lambda": "x3^k = lam^k for every k >= 1 with the canonical third block",
    "lambda_lipschitz": "|lam^k+1 - lam^k| <= L |x3^k+1 - x3^k| for k >= 1",
    "gradient_identity": "grad f3(x3^k) = lam^k for every k >= 1",
}


def slack(q):
    return SLACK * (1.0 + abs(q))


@dataclass
class Check:
    """Outcome of one monitored inequality.

    ``worst_violation`` is the largest amount (>= 0) by which the inequality
    fails before slack is applied. ``at_iteration`` is the first iterate index
    where the violation exceeds the slack, or, for passing checks, the index
    of the largest violation (None when nothing was violated at all).
    """

    name: str
    paper_anchor: str
    passed: bool
    worst_violation: float
    at_iteration: int | None
    detail: str = ""

    def to_json(self):
        return {
            "name": self.name,
            "paper_anchor": self.paper_anchor,
            "pass": self.passed,
            "worst_violation": self.worst_violation,
            "at_iteration": self.at_iteration,
        }


def _inequality_check(name, viol, allowed, index, detail=""):
    """Build a Check from violations ``viol[j]`` at iterate ``index[j]``."""
    viol = np.asarray(viol, dtype=float)
    allowed = np.broadcast_to(np.asarray(allowed, dtype=float), viol.shape)
    if viol.size == 0:
        return Check(name, ANCHORS[name], True, 0.0, None, detail or "no steps to check")
    bad = np.flatnonzero(~(viol <= allowed))
    pos = np.maximum(viol, 0.0)
    pos = np.where(np.isnan(viol), np.inf, pos)
    worst = float(pos.max())
    if bad.size:
        at = int(index[bad[0]])
    elif worst > 0:
        at = int(index[int(np.argmax(pos))])
    else:
        at = None
    return Check(name, ANCHORS[name], bad.size == 0, worst, at, detail)


# ---------------------------------------------------------------------------
# augmented Lagrangian descent


def decrease_margin(gamma, sigma=1.0, L=1.0):
    """``min{gamma/2, (gamma + sigma)/2 - L^2/gamma}``; may be nonpositive."""
    return min(gamma / 2.0, (gamma + sigma) / 2.0 - L * L / gamma)


def _step_sq(trace):
    return trace.column("d_x1") ** 2 + trace.column("d_x2") ** 2 + trace.column("d_x3") ** 2


def check_high_gamma(trace: Trace, p: RlsdProblem, gamma, sigma=1.0, L=1.0, start=0):
    """Descent, lower-bound and summability checks for large ``gamma``.

    Pairs ``(k, k+1)`` with ``k >= start`` are checked; a failing pair is
    reported at ``k + 1``. Raises NotApplicableError when the margin is not
    positive.
    """
    if len(trace) == 0:
        raise InvalidInputError("trace is empty")
    M = decrease_margin(gamma, sigma, L)
    if not M > 0:
        raise NotApplicableError(f"decrease margin M = {M:.6g} is not positive at gamma = {gamma}")
    Lg = trace.column("lagrangian")
    steps = _step_sq(trace)
    n = len(Lg)
    ks = np.arange(start, n - 1)
    tol = slack(Lg[0])
    descent = _inequality_check(
        "descent", M * steps[ks + 1] - (Lg[ks] - Lg[ks + 1]), tol, ks + 1, f"M = {M!r}"
    )
    Lstar = p.lower_bound
    lower = _inequality_check(
        "lower_bound", Lstar - Lg, slack(Lstar), np.arange(n), f"L* = {Lstar!r}"
    )
    bound = (Lg[min(start, n - 1)] - Lstar) / M
    partial = np.cumsum(steps[ks + 1])
    summ = _inequality_check(
        "summability", partial - bound, slack(bound), ks + 1, f"bound = {bound!r}"
    )
    return [descent, lower, summ]


# ---------------------------------------------------------------------------
# Lyapunov potentials against a reference solution


class Snapshot(NamedTuple):
    """Block images and duals of one iterate; what the potentials need."""

    a1x1: np.ndarray
    a2x2: np.ndarray
    x3: np.ndarray
    lam: np.ndarray


@dataclass(eq=False)
class ReferenceSolution:
    """A high-accuracy KKT point used as the anchor of the potentials."""

    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    lam: np.ndarray
    a1x1: np.ndarray
    a2x2: np.ndarray
    provenance: str
    kkt_max: float

    @classmethod
    def from_point(cls, p, x1, x2, x3, lam, provenance):
        x1, x2, x3, lam = (np.asarray(v, dtype=float).reshape(-1) for v in (x1, x2, x3, lam))
        kkt = kkt_residual(p, x1, x2, x3, lam).max
        return cls(x1, x2, x3, lam, p.block1.map.apply(x1), p.block2.map.apply(x2),
                   provenance, kkt)

    @property
    def identifier(self):
        h = hashlib.sha256()
        for a in (self.x1, self.x2, self.x3, self.lam):
            h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def to_json(self):
        return {
            "id": self.identifier,
            "provenance": self.provenance,
            "kkt_max": self.kkt_max,
            "x1": self.x1.tolist(),
            "x2": self.x2.tolist(),
            "x3": self.x3.tolist(),
            "lam": self.lam.tolist(),
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path, p):
        """Load and re-validate against ``p`` (the stored kkt is recomputed)."""
        try:
            d = json.loads(Path(path).read_text())
            ref = cls.from_point(p, d["x1"], d["x2"], d["x3"], d["lam"], d["provenance"])
        except (KeyError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"{path}: malformed reference ({exc})") from exc
        return ref

    def summary(self):
        return {"id": self.identifier, "provenance": self.provenance, "kkt_max": self.kkt_max}


def reference_gamma(p):
    """Penalty used for reference solves: 2, raised into the descent range if needed."""
    if p.canonical:
        return 2.0
    return max(2.0, 1.5 * high_lower(p.f3.sigma, p.f3.L))


def compute_reference(p: RlsdProblem, gamma=None, tol=REFERENCE_TOL, max_iter=20000,
                      polish=(0.5, 0.125)):
    """Solve ``p`` to ``kkt <= tol`` and return the point as a ReferenceSolution.

    The main run uses ``gamma`` (default :func:`reference_gamma`). If it stalls
    above ``tol`` (large data scales put a rounding floor near ``n * ulp(|b|)``
    times gamma), the run continues from its last iterate at each factor in
    ``polish`` times ``gamma``; a smaller penalty lowers that floor. Raises
    NumericalError when the final point is worse than ``1e-11``.
    """
    g = reference_gamma(p) if gamma is None else float(gamma)
    st, kkt, sweeps = _run_until_stall(p, g, tol, max_iter, None)
    phases = [f"gamma={g!r}: {sweeps} sweeps, kkt={kkt:.3e}"]
    for factor in polish:
        if kkt <= tol:
            break
        gp = g * factor
        st, kkt, sweeps = _run_until_stall(p, gp, tol, max_iter, st)
        phases.append(f"polish gamma={gp!r}: {sweeps} sweeps, kkt={kkt:.3e}")
    ref = ReferenceSolution.from_point(
        p, st.x1, st.x2, st.x3, st.lam, "three-block ADMM from zero; " + "; ".join(phases)
    )
    if not ref.kkt_max <= REFERENCE_MAX_KKT:
        raise NumericalError(f"reference solve reached only kkt={ref.kkt_max:.3e}",
                             gap=ref.kkt_max)
    return ref


def _run_until_stall(p, gamma, tol, max_iter, state, chunk=500):
    """Solve in chunks; stop at ``tol``, ``max_iter``, or a chunk without a 2x gain."""
    cfg = SolverConfig(gamma=gamma, max_iter=chunk, tol_kkt=tol, inner_tol=0.1 * tol,
                       inner_max_iter=20000)
    best = math.inf
    sweeps = 0
    while True:
        res = solve(p, cfg, state=state)
        state = res.state
        sweeps += res.iterations
        kkt = res.kkt.max
        if res.status.value == "NumericalFailure":
            raise NumericalError(f"reference solve failed: {res.message}")
        if kkt <= tol or sweeps >= max_iter or not kkt < 0.5 * best:
            return state, kkt, sweeps
        best = kkt


def lyapunov_mid(state, ref: ReferenceSolution, gamma):
    """``|lam - lam*|^2/(2 gamma) + gamma/2 |A2x2 - A2x2*|^2 + gamma/2 |x3 - x3*|^2``."""
    dl = np.asarray(state.lam) - ref.lam
    d2 = np.asarray(state.a2x2) - ref.a2x2
    d3 = np.asarray(state.x3) - ref.x3
    return float(dl @ dl) / (2.0 * gamma) + 0.5 * gamma * (float(d2 @ d2) + float(d3 @ d3))


def lyapunov_low(state, prev_state, ref: ReferenceSolution, gamma, eps=CANONICAL_LOW_EPS):
    """:func:`lyapunov_mid` plus ``(gamma * eps / 2) |x3 - x3_prev|^2``."""
    d = np.asarray(state.x3) - np.asarray(prev_state.x3)
    return lyapunov_mid(state, ref, gamma) + 0.5 * gamma * eps * float(d @ d)


def _snapshots(trace):
    arr = trace.iterate_array()
    if arr is None:
        raise InvalidInputError("this check needs a trace with stored iterates")
    return [Snapshot(*row) for row in arr]


def potential_series(trace, ref, gamma, eps=None):
    """Potential values per iterate; with ``eps`` the low-gamma form (NaN at k = 0)."""
    snaps = _snapshots(trace)
    if eps is None:
        return np.array([lyapunov_mid(s, ref, gamma) for s in snaps])
    out = [math.nan]
    for prev, cur in zip(snaps[:-1], snaps[1:]):
        out.append(lyapunov_low(cur, prev, ref, gamma, eps))
    return np.array(out)


def check_potential(trace, ref, gamma, eps=None, start=0):
    """Non-increase of the mid (``eps=None``) or low potential from ``start``."""
    vals = potential_series(trace, ref, gamma, eps)
    name = "potential_mid" if eps is None else "potential_low"
    if eps is not None:
        start = max(start, 1)
    ks = np.arange(start, len(vals) - 1)
    viol = vals[ks + 1] - vals[ks]
    allowed = SLACK * (1.0 + np.abs(vals[ks]))
    detail = "" if eps is None else f"eps = {eps!r}"
    return _inequality_check(name, viol, allowed, ks + 1, detail)


# ---------------------------------------------------------------------------
# structural identities


def check_identity_x3_lambda(trace, p: RlsdProblem | None = None, tol=IDENTITY_TOL):
    """Worst ``|x3^k - lam^k| / (1 + |lam^k|)`` over ``k >= 1``, as a Check."""
    if p is not None and not p.canonical:
        raise NotApplicableError("x3 = lambda holds only with the canonical third block")
    snaps = _snapshots(trace)
    dev = np.array([
        np.linalg.norm(s.x3 - s.lam) / (1.0 + np.linalg.norm(s.lam)) for s in snaps[1:]
    ])
    return _inequality_check("identity_x3_lambda", dev, tol, np.arange(1, len(snaps)))


def check_lambda_lipschitz(trace, L):
    """``|lam^k+1 - lam^k| <= L |x3^k+1 - x3^k|`` for ``k >= 1``."""
    dl = trace.column("d_lambda")
    dx = trace.column("d_x3")
    ks = np.arange(2, len(dl))
    viol = dl[ks] - L * dx[ks]
    return _inequality_check("lambda_lipschitz", viol, SLACK * (1.0 + L * dx[ks]), ks)


def check_gradient_identity(trace, f3):
    """``|grad f3(x3^k) - lam^k| <= 1e-9 (1 + |lam^k|)`` for ``k >= 1``."""
    snaps = _snapshots(trace)[1:]
    dev = np.array([np.linalg.norm(f3.grad(s.x3) - s.lam) for s in snaps])
    allowed = np.array([slack(np.linalg.norm(s.lam)) for s in snaps])
    return _inequality_check("gradient_identity", dev, allowed, np.arange(1, len(snaps) + 1))


# ---------------------------------------------------------------------------
# dispatch


@dataclass
class CertificateReport:
    regime: str
    regimes: list
    gamma: float
    checks: list = field(default_factory=list)
    reference: dict | None = None
    empirical: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def certified(self):
        return self.regime != "Uncertified"

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failed(self):
        return [c for c in self.checks if not c.passed]

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self):
        return {
            "regime": self.regime,
            "regimes": list(self.regimes),
            "gamma": self.gamma,
            "checks": [c.to_json() for c in self.checks],
            "reference": self.reference,
            "empirical": self.empirical,
            "notes": list(self.notes),
        }


def _empirical(trace, cfg):
    kkt = trace.column("kkt_max")
    final = float(kkt[-1])
    tol = cfg.tol_kkt if cfg is not None else None
    return {
        "iterations": len(trace) - 1,
        "final_kkt": final,
        "tol_kkt": tol,
        "converged": bool(tol is not None and final <= tol),
    }


def _gamma_of(cfg, gamma):
    if gamma is not None:
        return float(gamma)
    if cfg is None:
        raise InvalidInputError("certify needs gamma or a SolverConfig")
    return cfg.gamma


def certify(trace: Trace, p: RlsdProblem, cfg: SolverConfig | None = None,
            ref: ReferenceSolution | None = None, *, gamma=None,
            eta1=DEFAULT_ETA1, eta2=DEFAULT_ETA2, eps=None):
    """Pick the certified regime(s) for ``gamma`` and run their checks.

    Canonical third block: ``gamma > 1`` is High, ``(sqrt2 - 1, 1]`` is Mid,
    ``(0, 1/2]`` is Low (both Mid and Low run in the overlap). Quadratic third
    block: membership in the admissible range for ``(sigma, L, eta1, eta2)``
    selects ExtendedHigh and/or ExtendedRange. Problems whose block maps lack
    full column rank, or ``gamma`` outside every range, are Uncertified; the
    structural identity checks and the empirical outcome are still reported.

    Raises MissingReferenceError when a potential check needs ``ref``.
    """
    g = _gamma_of(cfg, gamma)
    if trace.gamma != g:
        raise InvalidInputError(f"trace was recorded with gamma={trace.gamma}, not {g}")
    if len(trace) < 1:
        raise InvalidInputError("trace is empty")
    notes = []
    regimes = []
    plan = []  # (kind, kwargs)
    if p.canonical:
        structural = [check_identity_x3_lambda(trace, p)]
        if not p.full_column_rank:
            notes.append("a block map lacks full column rank; no certificate applies")
        else:
            cov = canonical_regime_coverage(g)
            if "high" in cov:
                regimes.append("High")
                plan.append(("high", dict(sigma=1.0, L=1.0, start=0)))
            if "mid" in cov:
                regimes.append("Mid")
                plan.append(("potential", dict(eps=None, start=0)))
            if "low" in cov:
                regimes.append("Low")
                plan.append(("potential", dict(eps=CANONICAL_LOW_EPS, start=1)))
    else:
        f3 = p.f3
        params = GammaRangeParams(f3.sigma, f3.L, eta1, eta2)
        structural = [check_gradient_identity(trace, f3), check_lambda_lipschitz(trace, f3.L)]
        if not p.full_column_rank:
            notes.append("a block map lacks full column rank; no certificate applies")
        else:
            pieces = admissible_pieces(params)
            if pieces["high"].contains(g):
                regimes.append("ExtendedHigh")
                plan.append(("high", dict(sigma=f3.sigma, L=f3.L, start=1)))
            if "mid" in pieces and pieces["mid"].contains(g):
                regimes.append("ExtendedRange")
                plan.append(("potential", dict(eps=None, start=1)))
            if pieces["low"].contains(g):
                if "ExtendedRange" not in regimes:
                    regimes.append("ExtendedRange")
                e = _general_eps(g, f3.sigma, eta2) if eps is None else float(eps)
                plan.append(("potential", dict(eps=e, start=1)))
            notes.append(f"range parameters sigma={f3.sigma!r} L={f3.L!r} "
                         f"eta1={eta1!r} eta2={eta2!r}")
    if not regimes:
        regimes = ["Uncertified"]
        if p.full_column_rank:
            notes.append(f"gamma={g!r} lies outside every certified range")
    needs_ref = any(kind == "potential" for kind, _ in plan)
    if needs_ref and ref is None:
        raise MissingReferenceError(
            f"regime {'/'.join(regimes)} needs a reference solution (use --compute-reference)"
        )
    if ref is not None and (ref.x3.shape[0] != p.dim or ref.x1.shape[0] != p.block1.dim
                            or ref.x2.shape[0] != p.block2.dim):
        raise InvalidInputError("reference solution does not match the problem dimensions")
    checks = list(structural)
    for kind, kw in plan:
        if kind == "high":
            checks.extend(check_high_gamma(trace, p, g, **kw))
        else:
            checks.append(check_potential(trace, ref, g, **kw))
    return CertificateReport(
        regime=regimes[0],
        regimes=regimes,
        gamma=g,
        checks=checks,
        reference=None if ref is None else ref.summary(),
        empirical=_empirical(trace, cfg),
        notes=notes,
    )


def _general_eps(gamma, sigma, eta2):
    """Default eps for the general low-gamma potential.

    ``2 eta2/(eta2 - 2) + 1`` when that keeps ``sigma + sigma^2/(2 gamma) - gamma eps``
    positive, else the midpoint of the feasible eps interval.
    """
    lo = 2.0 * eta2 / (eta2 - 2.0)
    hi = (sigma + sigma * sigma / (2.0 * gamma)) / gamma
    e = lo + 1.0
    if e < hi or hi <= lo:
        return e
    return 0.5 * (lo + hi)

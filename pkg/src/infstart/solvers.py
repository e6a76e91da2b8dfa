"""Damped Newton and short-step path-following minimization of the auxiliary problem."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .auxiliary import AuxPoint, Direction, AuxProblem, default_refs, hot_start_refs
from .errors import OutOfDomain, SingularSystem
from .model import (
    AlternativeCertificate,
    ConicProblem,
    PrimalDualTriple,
    Residuals,
    check_certificate,
    check_eps_optimal,
    residuals,
    validate,
)

log = logging.getLogger(__name__)

CONVERGED = "converged"
ITERATION_LIMIT = "iteration_limit"
NO_PROGRESS = "no_progress"
NUMERICAL_FAILURE = "numerical_failure"
INVARIANT_VIOLATED = "invariant_violated"

MAX_HALVINGS = 30


@dataclass
class SolverOptions:
    method: str = "damped"  # "damped" or "path"
    lambda_tol: float = 1e-12
    max_iters: int = 5000
    beta_hat: float = 0.126
    gamma_hat: float = 0.164
    quad_entry: float = 0.5
    divergence_cap: float = 1e12
    trace: bool = True
    callback: Optional[Callable[["IterationRecord"], None]] = None

    def __post_init__(self):
        if self.method not in ("damped", "path"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0.0 < self.lambda_tol < self.quad_entry < 1.0:
            raise ValueError("need 0 < lambda_tol < quad_entry < 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")

    @property
    def beta_tilde(self) -> float:
        return 0.5 - self.beta_hat


@dataclass
class IterationRecord:
    k: int
    phase: str  # "damped", "quadratic", or "path"
    t: float
    lam: float
    phi: float
    step_norm: float = 0.0
    # path-following only
    lam_g: float | None = None
    proximity: float | None = None
    t_next: float | None = None
    halvings: int = 0

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass
class SolveReport:
    status: str
    method: str
    eps: float
    iterations: list = field(default_factory=list)
    final_u: np.ndarray | None = None
    final_mult: np.ndarray | None = None
    final_lambda: float = math.inf
    recovered: PrimalDualTriple | None = None
    residuals: Residuals | None = None
    eps_optimal: bool = False
    message: str = ""
    wall_time: float = 0.0
    certificate: AlternativeCertificate | None = None
    certificate_valid: bool = False
    aux: AuxProblem | None = None

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def count(self, phase: str) -> int:
        return sum(1 for r in self.iterations if r.phase == phase and r.step_norm > 0)

    @property
    def n_steps(self) -> int:
        """Number of steps actually taken (records with a nonzero step)."""
        return sum(1 for r in self.iterations if r.step_norm > 0)


def _safe_step(pt: AuxPoint, d: Direction, alpha: float):
    """``pt`` moved by ``alpha`` along ``d``, halving the step while it leaves the domain."""
    for halvings in range(MAX_HALVINGS + 1):
        try:
            return pt.advance(d, alpha), halvings
        except OutOfDomain:
            alpha *= 0.5
    raise OutOfDomain("step stayed outside the domain after repeated halving")


class _Recorder:
    def __init__(self, opts: SolverOptions, records: list):
        self.opts = opts
        self.records = records

    def __call__(self, rec: IterationRecord):
        if self.opts.trace:
            self.records.append(rec)
        if self.opts.callback is not None:
            self.opts.callback(rec)


@dataclass
class _NewtonResult:
    point: AuxPoint
    mult: np.ndarray
    lam: float
    status: str
    message: str = ""
    steps: int = 0


def minimize_phi_t(
    aux: AuxProblem,
    t: float = 0.0,
    u0=None,
    opts: SolverOptions | None = None,
    records: list | None = None,
    k0: int = 0,
    force_phase: str | None = None,
) -> _NewtonResult:
    """Minimize ``Phi_t`` on the constraint set with the damped Newton step ``h / (1 + lam)``.

    Steps with ``lam >= quad_entry`` are labelled "damped", the rest "quadratic".
    Stops when ``lam <= lambda_tol``.
    """
    opts = opts or SolverOptions()
    records = [] if records is None else records
    emit = _Recorder(opts, records)
    tg = t * aux.g
    if isinstance(u0, AuxPoint):
        pt = u0
    else:
        pt = aux.point(aux.zero() if u0 is None else u0)
    best = None
    no_contract = 0
    stalls = 0
    prev_lam = math.inf
    prev_d = None
    k = k0
    steps = 0
    while True:
        try:
            d = pt.newton(t, warm=prev_d)
        except SingularSystem as exc:
            res = best or _NewtonResult(pt, np.zeros(aux.problem.m), math.inf, NUMERICAL_FAILURE)
            res.status, res.message = NUMERICAL_FAILURE, str(exc)
            return res
        lam, mult = d.lam, d.mult
        phi = pt.value + float(tg @ pt.u)
        phase = force_phase or ("damped" if lam >= opts.quad_entry else "quadratic")
        if best is None or lam < best.lam:
            best = _NewtonResult(pt, mult, lam, CONVERGED, steps=steps)

        if lam <= opts.lambda_tol:
            emit(IterationRecord(k=k, phase=phase, t=t, lam=lam, phi=phi))
            return _NewtonResult(pt, mult, lam, CONVERGED, steps=steps)

        if lam < opts.quad_entry:
            no_contract = no_contract + 1 if lam >= prev_lam else 0
            if no_contract >= 2:
                emit(IterationRecord(k=k, phase=phase, t=t, lam=lam, phi=phi))
                best.status = NUMERICAL_FAILURE
                best.message = (
                    f"restricted norm stopped contracting at {best.lam:.3e}; "
                    f"lambda_tol={opts.lambda_tol:.1e} is below attainable precision"
                )
                best.steps = steps
                return best
        if k - k0 >= opts.max_iters:
            emit(IterationRecord(k=k, phase=phase, t=t, lam=lam, phi=phi))
            best.status = ITERATION_LIMIT
            best.message = f"iteration limit {opts.max_iters} reached"
            best.steps = steps
            return best

        try:
            new_pt, halvings = _safe_step(pt, d, -1.0 / (1.0 + lam))
        except OutOfDomain as exc:
            emit(IterationRecord(k=k, phase=phase, t=t, lam=lam, phi=phi))
            best.status, best.message = NUMERICAL_FAILURE, str(exc)
            return best
        if halvings:
            log.info("step %d halved %d times to stay in the domain", k, halvings)
        step_norm = float(np.linalg.norm(new_pt.u - pt.u))
        emit(IterationRecord(k=k, phase=phase, t=t, lam=lam, phi=phi, step_norm=step_norm, halvings=halvings))
        steps += 1

        new_phi = new_pt.value + float(tg @ new_pt.u)
        if phase == "damped":
            stalls = stalls + 1 if phi - new_phi < 1e-14 else 0
            if stalls >= 10:
                res = _NewtonResult(new_pt, mult, lam, NO_PROGRESS, "objective stopped decreasing", steps)
                return res
        if np.linalg.norm(new_pt.u) > opts.divergence_cap:
            return _NewtonResult(new_pt, mult, lam, NO_PROGRESS, "iterates diverge; problem may not be strictly feasible", steps)
        prev_lam = lam
        prev_d = d
        pt = new_pt
        k += 1


def quadratic_phase(aux: AuxProblem, u0, opts: SolverOptions | None = None, records=None, k0: int = 0):
    """Newton steps on ``Phi`` from a point inside the region ``lam < quad_entry``.

    Returns ``(point, mult, status)``.
    """
    res = minimize_phi_t(aux, 0.0, u0, opts, records, k0=k0, force_phase="quadratic")
    return res.point, res.mult, res.status


def _finish(aux: AuxProblem, report: SolveReport, res: _NewtonResult, t0: float):
    problem = aux.problem
    report.final_u = res.point.u.astype(float)
    report.final_mult = np.asarray(res.mult).astype(float)
    report.final_lambda = res.lam
    if res.status != CONVERGED:
        report.status = res.status
        report.message = res.message or report.message
    report.recovered = aux.recover(res.point, res.mult)
    report.residuals = residuals(problem, report.recovered)
    report.eps_optimal = check_eps_optimal(problem, report.recovered, aux.eps, 1e-8)
    if report.status == NO_PROGRESS:
        u = res.point.u.astype(float)
        scale = float(np.max(np.abs(u)))
        if scale > 0:
            x, y, tau = aux.split(u / scale)
            report.certificate = AlternativeCertificate(x=x, y=y, tau=tau)
            report.certificate_valid = check_certificate(problem, report.certificate, aux.eps)
    report.wall_time = time.perf_counter() - t0
    return report


def damped_newton_solve(aux: AuxProblem, opts: SolverOptions | None = None) -> SolveReport:
    """Damped Newton method from ``u = 0``; the same step continues through the quadratic region."""
    opts = opts or SolverOptions(method="damped")
    t0 = time.perf_counter()
    report = SolveReport(status=CONVERGED, method="damped", eps=aux.eps, aux=aux)
    res = minimize_phi_t(aux, 0.0, None, opts, report.iterations)
    return _finish(aux, report, res, t0)


def path_follow_solve(aux: AuxProblem, opts: SolverOptions | None = None) -> SolveReport:
    """Short-step following of the minimizers of ``Phi_t`` from ``t = 1`` (where ``u = 0``) down to 0.

    Switches to Newton steps on ``Phi`` once ``t_k lam_{u_k}(g) < 1/2 - beta_hat``.
    """
    opts = opts or SolverOptions(method="path")
    t0 = time.perf_counter()
    report = SolveReport(status=CONVERGED, method="path", eps=aux.eps, aux=aux)
    emit = _Recorder(opts, report.iterations)
    g = aux.g
    bh, gh = opts.beta_hat, opts.gamma_hat
    pt = aux.point(aux.zero())
    t = 1.0
    k = 0
    prev_d = None
    while True:
        try:
            lam_g = pt.direction(g).lam
            cur = pt.newton(t, warm=prev_d)
            proximity, mult = cur.lam, cur.mult
        except SingularSystem as exc:
            res = _NewtonResult(pt, np.zeros(aux.problem.m), math.inf, NUMERICAL_FAILURE, str(exc))
            return _finish(aux, report, res, t0)
        phi = pt.value + t * float(g @ pt.u)
        if proximity > bh + 1e-8:
            emit(IterationRecord(k=k, phase="path", t=t, lam=proximity, phi=phi, lam_g=lam_g, proximity=proximity))
            report.status = INVARIANT_VIOLATED
            report.message = f"proximity {proximity:.6g} exceeds beta_hat={bh} at iteration {k}"
            res = _NewtonResult(pt, mult, proximity, INVARIANT_VIOLATED, report.message)
            return _finish(aux, report, res, t0)
        if t * lam_g < opts.beta_tilde:
            break
        if k >= opts.max_iters:
            report.status = ITERATION_LIMIT
            res = _NewtonResult(pt, mult, proximity, ITERATION_LIMIT, f"iteration limit {opts.max_iters} reached")
            return _finish(aux, report, res, t0)

        t_next = max(t - gh / lam_g, 0.0) if lam_g > 0 else 0.0
        try:
            d = pt.newton(t_next, warm=cur)
            lam = d.lam
        except SingularSystem as exc:
            res = _NewtonResult(pt, mult, proximity, NUMERICAL_FAILURE, str(exc))
            return _finish(aux, report, res, t0)
        xi = lam * lam / (1.0 + lam)
        try:
            new_pt, halvings = _safe_step(pt, d, -1.0 / (1.0 + xi))
        except OutOfDomain as exc:
            res = _NewtonResult(pt, mult, proximity, NUMERICAL_FAILURE, str(exc))
            return _finish(aux, report, res, t0)
        emit(
            IterationRecord(
                k=k,
                phase="path",
                t=t,
                lam=lam,
                phi=phi,
                step_norm=float(np.linalg.norm(new_pt.u - pt.u)),
                lam_g=lam_g,
                proximity=proximity,
                t_next=t_next,
                halvings=halvings,
            )
        )
        if np.linalg.norm(new_pt.u) > opts.divergence_cap:
            res = _NewtonResult(new_pt, mult, lam, NO_PROGRESS, "iterates diverge; problem may not be strictly feasible")
            return _finish(aux, report, res, t0)
        pt = new_pt
        prev_d = d
        t = t_next
        k += 1

    remaining = SolverOptions(
        method="path",
        lambda_tol=opts.lambda_tol,
        max_iters=max(opts.max_iters - k, 1),
        beta_hat=opts.beta_hat,
        gamma_hat=opts.gamma_hat,
        quad_entry=opts.quad_entry,
        divergence_cap=opts.divergence_cap,
        trace=opts.trace,
        callback=opts.callback,
    )
    res = minimize_phi_t(aux, 0.0, pt, remaining, report.iterations, k0=k, force_phase="quadratic")
    return _finish(aux, report, res, t0)


def solve(
    problem: ConicProblem,
    eps: float,
    opts: SolverOptions | None = None,
    start: PrimalDualTriple | None = None,
    x_bar=None,
) -> SolveReport:
    """Validate, build references and the auxiliary problem, minimize, and recover the eps-solution.

    ``start`` hot-starts from a guess ``(x~, s~, y~)``; otherwise the references
    are ``x_bar`` (default: the cone's unit point) and ``-grad F(x_bar)``.
    """
    opts = opts or SolverOptions()
    validate(problem)
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    refs = hot_start_refs(problem, start) if start is not None else default_refs(problem, x_bar)
    aux = AuxProblem(problem, eps, refs)
    if opts.method == "damped":
        return damped_newton_solve(aux, opts)
    return path_follow_solve(aux, opts)

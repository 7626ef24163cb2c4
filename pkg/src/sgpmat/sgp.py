"""Sequential global programming driver.

Each outer iteration builds the separable model at the current design and
solves it globally.  The trial design is accepted once

    J(B+) < J(B) - delta |B+ - B|^2

holds, otherwise the proximal parameter ``tau`` is multiplied by ``theta``.
``J = J_phys + eta J_reg + gamma J_gray``.  Continuation repeats the loop for
an increasing sequence of ``gamma`` values, warm-started each time.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .graph import DesignState, MaterialGraph, grayness_total
from .hyper import AsymptotePair, build_model
from .objectives import DesignGradient
from .regularization import FilterMatrix, j_reg, j_reg_gradient
from .subproblem import solve_subproblem

log = logging.getLogger(__name__)

GRAY_TOL = 1e-12


class InnerLoopError(RuntimeError):
    """The acceptance test kept failing; usually an inconsistent gradient."""


@dataclass
class SgpConfig:
    delta: float | None = None
    theta: float = 2.0
    tau_init: float | None = None
    gammas: tuple = ()
    eps_stop: float | None = None
    max_outer: int = 200
    max_inner: int = 60
    checkpoint_every: int = 0
    checkpoint_path: str | None = None

    def __post_init__(self):
        if self.theta <= 1:
            raise ValueError("theta must exceed 1")
        if self.eps_stop is not None and self.eps_stop < 0:
            raise ValueError("eps_stop must be nonnegative")
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.tau_init is not None and self.tau_init <= 0:
            raise ValueError("tau_init must be positive")
        g = list(self.gammas)
        if any(b <= a for a, b in zip(g, g[1:])):
            raise ValueError("gamma schedule must be strictly increasing")
        if any(x < 0 for x in g):
            raise ValueError("gamma values must be nonnegative")


@dataclass
class IterationRecord:
    stage: int
    j: int
    tau: float
    gamma: float
    J_total: float
    J_phys: float
    eta_J_reg: float
    gamma_J_gray: float
    step_norm: float
    inner: int
    wall_time: float = 0.0


LOG_FIELDS = ["stage", "j", "J_total", "J_phys", "eta_J_reg", "gamma_J_gray", "tau", "gamma",
              "step_norm", "inner"]


@dataclass
class Evaluation:
    j_phys: float
    j_reg: float
    f: float
    gradient: DesignGradient


@dataclass
class Problem:
    """Objective plus material graph, regularization and model asymptotes."""

    graph: MaterialGraph
    objective: object  # callable: tensors -> result with .value and .gradient
    asymptotes: AsymptotePair
    filt: FilterMatrix | None = None
    eta: float = 0.0
    discrete: bool = False
    n_evaluations: int = field(default=0, repr=False)

    def __post_init__(self):
        self.asymptotes = self.asymptotes.for_graph(self.graph)
        self.asymptotes.validate(self.graph)

    def evaluate(self, state: DesignState) -> Evaluation:
        self.n_evaluations += 1
        res = self.objective(state.tensors)
        grad = res.gradient
        reg = 0.0
        if self.filt is not None and self.eta:
            reg = j_reg(state.tensors, self.filt)
            grad = grad + j_reg_gradient(state.tensors, self.filt) * self.eta
        return Evaluation(float(res.value), reg, float(res.value) + self.eta * reg, grad)


@dataclass
class RunResult:
    state: DesignState
    records: list
    converged: bool
    last_tau: float


def _record(stage, j, tau, gamma, ev: Evaluation, eta, state, step, inner, t0):
    gray = grayness_total(state)
    return IterationRecord(stage, j, tau, gamma, ev.f + gamma * gray, ev.j_phys, eta * ev.j_reg,
                           gamma * gray, step, inner, time.perf_counter() - t0)


def sgp_run(problem: Problem, initial: DesignState, config: SgpConfig, gamma: float = 0.0,
            stage: int = 0, resume: dict | None = None) -> RunResult:
    """Outer SGP loop at fixed gamma, starting from ``initial`` (or a checkpoint)."""
    t0 = time.perf_counter()
    state = initial.copy()
    ev = problem.evaluate(state)
    total = ev.f + gamma * grayness_total(state)
    k = len(state)
    if resume:
        j0, last_tau = resume["j"], resume["last_tau"]
        delta, tau_init, eps = resume["delta"], resume["tau_init"], resume["eps_stop"]
        records = []
    else:
        j0 = 0
        delta = config.delta if config.delta is not None else 1e-8 * (1 + abs(total))
        gmax = float(np.max(ev.gradient.element_norms())) if k else 0.0
        tau_init = config.tau_init if config.tau_init is not None else max(1e-3 * gmax, 1e-12)
        eps = config.eps_stop if config.eps_stop is not None else 1e-9 * np.sqrt(k)
        last_tau = tau_init
        records = [_record(stage, 0, 0.0, gamma, ev, problem.eta, state, 0.0, 0, t0)]
    consts = {"delta": delta, "tau_init": tau_init, "eps_stop": eps}
    converged = False
    for j in range(j0 + 1, config.max_outer + 1):
        tau = max(tau_init, last_tau / config.theta)
        tried = []
        for inner in range(1, config.max_inner + 1):
            model = build_model(state.tensors, ev.f, ev.gradient, problem.asymptotes, tau)
            trial = solve_subproblem(model, problem.graph, gamma, problem.discrete)
            step2 = state.distance2(trial)
            if np.sqrt(step2) <= eps:
                converged = True
                break
            tev = problem.evaluate(trial)
            ttotal = tev.f + gamma * grayness_total(trial)
            tried.append((tau, ttotal, step2))
            if ttotal < total - delta * step2:
                break
            tau *= config.theta
        else:
            detail = ", ".join(f"tau={t:.3e} J={v:.10e} |d|^2={s:.3e}" for t, v, s in tried[-5:])
            raise InnerLoopError(
                f"no acceptable step after {config.max_inner} inner iterations at outer iteration {j} "
                f"(J={total:.10e}); last trials: {detail}")
        if converged:
            log.info("stage %d converged at iteration %d", stage, j - 1)
            break
        state, ev, total, last_tau = trial, tev, ttotal, tau
        rec = _record(stage, j, tau, gamma, ev, problem.eta, state, float(np.sqrt(step2)), inner, t0)
        records.append(rec)
        log.debug("stage %d it %d J=%.8e tau=%.3e step=%.3e inner=%d", stage, j, total, tau,
                  rec.step_norm, inner)
        if config.checkpoint_every and config.checkpoint_path and j % config.checkpoint_every == 0:
            save_checkpoint(config.checkpoint_path, state, stage, j, last_tau, consts)
    return RunResult(state, records, converged, last_tau)


def continuation_run(problem: Problem, initial: DesignState, config: SgpConfig,
                     resume: dict | None = None) -> RunResult:
    """SGP runs over the gamma schedule, stopping once the design is discrete."""
    gammas = list(config.gammas) or [0.0]
    state = initial
    records = []
    converged = True
    last_tau = 0.0
    first = resume["stage"] if resume else 0
    for stage in range(first, len(gammas)):
        res = sgp_run(problem, state, config, gammas[stage], stage,
                      resume if resume and stage == first else None)
        state = res.state
        records.extend(res.records)
        converged, last_tau = res.converged, res.last_tau
        if grayness_total(state) <= GRAY_TOL and len(gammas) > 1:
            log.info("discrete design reached at gamma=%g", gammas[stage])
            break
    return RunResult(state, records, converged, last_tau)


def write_log(path, records, append=False):
    path = Path(path)
    new = not (append and path.exists())
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LOG_FIELDS, extrasaction="ignore")
        if new:
            w.writeheader()
        for r in records:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in asdict(r).items()})


def read_log(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def save_checkpoint(path, state: DesignState, stage, j, last_tau, consts):
    np.savez(Path(path), edge=state.edge, alpha=state.alpha, tensors=state.tensors,
             stage=stage, j=j, last_tau=last_tau, **consts)


def load_checkpoint(path, graph: MaterialGraph):
    data = np.load(Path(path))
    state = DesignState.from_coordinates(graph, data["edge"], data["alpha"])
    if not np.array_equal(state.tensors, data["tensors"]):
        raise ValueError("checkpoint tensors do not match the material graph")
    resume = {key: data[key].item() for key in ("stage", "j", "last_tau", "delta", "tau_init", "eps_stop")}
    return state, resume

"""Bounded Levenberg-Marquardt least squares with seeded multi-start."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class Parameter:
    name: str
    initial: float
    lower: float = -np.inf
    upper: float = np.inf
    fixed: bool = False


@dataclass
class FitProblem:
    """model(x, p) -> y for the full parameter vector p (ordered as ``parameters``).

    ``jacobian(x, p)``, when given, returns d model / d p with shape (len(x), len(p)).
    """

    model: Callable[[np.ndarray, np.ndarray], np.ndarray]
    x: np.ndarray
    y: np.ndarray
    parameters: Sequence[Parameter]
    sigma: np.ndarray | None = None
    jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    name: str = "fit"

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.sigma is not None:
            self.sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float), self.y.shape).copy()
            if np.any(self.sigma <= 0):
                raise FitError("per-point sigma must be positive")
        self.parameters = list(self.parameters)
        for p in self.parameters:
            if not p.lower <= p.upper:
                raise FitError(f"{p.name}: lower bound {p.lower} above upper bound {p.upper}")
            if not p.lower <= p.initial <= p.upper:
                raise FitError(f"{p.name}: initial value {p.initial} outside [{p.lower}, {p.upper}]")
        if not self.free:
            raise FitError("no free parameters")
        if self.y.size <= len(self.free):
            raise FitError(f"{self.y.size} data points for {len(self.free)} free parameters")

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.parameters]

    @property
    def free(self) -> list[int]:
        return [i for i, p in enumerate(self.parameters) if not p.fixed]

    def full(self, free_values: np.ndarray) -> np.ndarray:
        p = np.array([q.initial for q in self.parameters], dtype=float)
        p[self.free] = free_values
        return p

    def residuals(self, p_full: np.ndarray) -> np.ndarray:
        r = np.asarray(self.model(self.x, p_full), dtype=float) - self.y
        if self.sigma is not None:
            r = r / self.sigma
        return r


@dataclass(frozen=True)
class FitConfig:
    tol: float = 1e-12
    max_iter: int = 200
    restarts: int = 0
    seed: int = 0
    lambda0: float = 1e-3
    cond_limit: float = 1e12


@dataclass
class FitResult:
    names: list[str]
    values: np.ndarray
    uncertainties: np.ndarray
    residual_rms: float
    cost: float
    converged: bool
    iterations: int
    cost_history: list[float]
    covariance: np.ndarray
    flags: list[str] = field(default_factory=list)
    message: str = ""
    restarts_used: int = 0

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def sigma(self, name: str) -> float:
        return float(self.uncertainties[self.names.index(name)])

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}


def numeric_jacobian(problem: FitProblem, p_full: np.ndarray, free_idx=None, r0=None) -> np.ndarray:
    """Forward differences of the residual vector, stepping away from active bounds."""
    free_idx = problem.free if free_idx is None else free_idx
    r0 = problem.residuals(p_full) if r0 is None else r0
    J = np.empty((r0.size, len(free_idx)))
    for col, i in enumerate(free_idx):
        par = problem.parameters[i]
        h = np.sqrt(np.finfo(float).eps) * max(abs(p_full[i]), 1e-3 * max(1.0, abs(par.initial)), 1e-8)
        if p_full[i] + h > par.upper:
            h = -h
        q = p_full.copy()
        q[i] += h
        J[:, col] = (problem.residuals(q) - r0) / h
    return J


def _residual_jacobian(problem: FitProblem, p_full: np.ndarray, r0: np.ndarray) -> np.ndarray:
    if problem.jacobian is None:
        return numeric_jacobian(problem, p_full, r0=r0)
    J = np.asarray(problem.jacobian(problem.x, p_full), dtype=float)[:, problem.free]
    if problem.sigma is not None:
        J = J / problem.sigma[:, None]
    return J


def _lm(problem: FitProblem, start: np.ndarray, config: FitConfig):
    lo = np.array([problem.parameters[i].lower for i in problem.free])
    hi = np.array([problem.parameters[i].upper for i in problem.free])
    x = np.clip(start, lo, hi)
    r = problem.residuals(problem.full(x))
    if not np.all(np.isfinite(r)):
        raise FitError(f"{problem.name}: non-finite model output at {dict(zip(problem.names, problem.full(x)))}")
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = config.lambda0
    converged = False
    message = "maximum iterations reached"
    it = 0
    for it in range(1, config.max_iter + 1):
        J = _residual_jacobian(problem, problem.full(x), r)
        A = J.T @ J
        g = J.T @ r
        scale = np.maximum(np.diag(A), 1e-30)
        # projected gradient small -> stationary point (possibly on a bound)
        pg = x - np.clip(x - g, lo, hi)
        if np.max(np.abs(pg)) <= 1e-14 * max(1.0, cost) and it > 1:
            converged, message = True, "gradient below tolerance"
            break
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(A + lam * np.diag(scale), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = np.clip(x + step, lo, hi)
            r_new = problem.residuals(problem.full(x_new))
            if np.all(np.isfinite(r_new)):
                cost_new = 0.5 * float(r_new @ r_new)
                if cost_new <= cost:
                    accepted = True
                    break
            lam *= 4.0
        if not accepted:
            converged, message = True, "no further decrease possible"
            break
        rel = (cost - cost_new) / max(cost, 1e-300)
        small_step = np.all(np.abs(x_new - x) <= 1e-12 * (np.abs(x) + 1e-12))
        x, r, cost = x_new, r_new, cost_new
        history.append(cost)
        lam = max(lam / 3.0, 1e-12)
        if rel < config.tol or small_step or cost == 0.0:
            converged, message = True, "relative cost change below tolerance"
            break
    return x, r, cost, history, converged, it, message


def _starts(problem: FitProblem, config: FitConfig):
    x0 = np.array([problem.parameters[i].initial for i in problem.free])
    yield x0
    if config.restarts <= 0:
        return
    rng = np.random.default_rng(config.seed)
    for _ in range(config.restarts):
        x = np.empty_like(x0)
        for k, i in enumerate(problem.free):
            p = problem.parameters[i]
            if np.isfinite(p.lower) and np.isfinite(p.upper):
                if p.lower > 0 and p.upper / p.lower > 100:
                    x[k] = np.exp(rng.uniform(np.log(p.lower), np.log(p.upper)))
                else:
                    x[k] = rng.uniform(p.lower, p.upper)
            else:
                x[k] = np.clip(x0[k] * (1.0 + rng.uniform(-0.5, 0.5)) + rng.normal(0, 1e-3), p.lower, p.upper)
        yield x


def least_squares(problem: FitProblem, config: FitConfig = FitConfig()) -> FitResult:
    """Minimize 0.5 * sum(((model - y) / sigma)^2) within the parameter bounds.

    The first start is the supplied initial point; ``config.restarts`` further
    starts are drawn from a generator seeded with ``config.seed``.
    """
    best = None
    for n, start in enumerate(_starts(problem, config)):
        try:
            out = _lm(problem, start, config)
        except FitError:
            if n == 0:
                raise
            continue
        if best is None or out[2] < best[2]:
            best = out
    x, r, cost, history, converged, iters, message = best

    p_full = problem.full(x)
    n, k = r.size, len(x)
    J = _residual_jacobian(problem, p_full, r)
    A = J.T @ J
    flags = []
    cov_free = np.full((k, k), np.nan)
    try:
        cond = np.linalg.cond(A)
    except np.linalg.LinAlgError:
        cond = np.inf
    if np.isfinite(cond) and cond < config.cond_limit:
        s2 = 2.0 * cost / (n - k) if problem.sigma is None else 1.0
        cov_free = np.linalg.inv(A) * s2
    else:
        flags.append(f"non-identifiable: curvature matrix condition number {cond:.2e}")
    cov = np.zeros((len(p_full), len(p_full)))
    cov[np.ix_(problem.free, problem.free)] = cov_free
    unc = np.sqrt(np.clip(np.diag(cov), 0, None))
    unc[[i for i in range(len(p_full)) if i not in problem.free]] = 0.0
    if np.any(~np.isfinite(unc)):
        flags.append("uncertainties undefined")
    if not converged:
        flags.append("not converged")
    raw = np.asarray(problem.model(problem.x, p_full), dtype=float) - problem.y
    return FitResult(
        names=problem.names,
        values=p_full,
        uncertainties=unc,
        residual_rms=float(np.sqrt(np.mean(raw**2))),
        cost=cost,
        converged=converged,
        iterations=iters,
        cost_history=history,
        covariance=cov,
        flags=flags,
        message=message,
        restarts_used=config.restarts,
    )

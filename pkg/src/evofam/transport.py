"""Upwind finite-volume solver for the half-line conservation law

    d/dt f = -d/dx ( g(t,x) f ) - mu(t,x) f,     f(t, 0) = 0,

the first-order transport system on L1(R>=0) with positive velocity g
bounded away from zero and decay mu >= mu_min > 0.  The half-line is
truncated at x_max with free outflow; coefficients are frozen per step
at the step midpoint in time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, UnsupportedError
from .symbols import CoefficientFunction, constant


@dataclass(frozen=True)
class TimeSpaceCoefficient:
    """Separable field c(t) * (w0 + w1 * x/(1+x)), positive and W^{1,inf}.

    The spatial part is bounded with bounded slope on the half-line; the
    time part reuses the closed-form coefficient family.
    """

    time_part: CoefficientFunction
    w0: float = 1.0
    w1: float = 0.0

    def __call__(self, t, x):
        c = np.real(np.asarray(self.time_part(t)))
        return c * (self.w0 + self.w1 * x / (1.0 + x))

    @property
    def is_constant(self) -> bool:
        return self.time_part.is_constant and self.w1 == 0.0

    def constant_value(self) -> float:
        if not self.is_constant:
            raise UnsupportedError("coefficient is not constant")
        return float(np.real(self.time_part(0.0))) * self.w0


def constant_field(value: float) -> TimeSpaceCoefficient:
    return TimeSpaceCoefficient(constant(value))


@dataclass(frozen=True)
class TransportProblem:
    horizon: float
    x_max: float
    cells: int
    velocity: TimeSpaceCoefficient
    decay: TimeSpaceCoefficient

    def __post_init__(self):
        if self.horizon <= 0 or self.x_max <= 0 or self.cells < 2:
            raise ConfigurationError("need horizon > 0, x_max > 0, cells >= 2")
        g_min, g_max = self.velocity_range()
        if g_min <= 0:
            raise ConfigurationError(f"velocity must stay positive (min {g_min})")
        # mu >= 0 allowed at construction: mu = 0 is a degenerate config
        # permitted for testing; the certified class needs mu_min > 0, see
        # satisfies_decay_hypothesis.
        if self.decay_min() < 0:
            raise ConfigurationError("decay must be nonnegative")

    def satisfies_decay_hypothesis(self) -> bool:
        return self.decay_min() > 0

    @property
    def h(self) -> float:
        return self.x_max / self.cells

    def centers(self) -> np.ndarray:
        return (np.arange(self.cells) + 0.5) * self.h

    def faces(self) -> np.ndarray:
        return np.arange(self.cells + 1) * self.h

    def velocity_range(self, samples: int = 64) -> tuple[float, float]:
        ts = np.linspace(0.0, self.horizon, samples)
        xs = np.linspace(0.0, self.x_max, samples)
        vals = self.velocity(ts[:, None], xs[None, :])
        return float(np.min(vals)), float(np.max(vals))

    def decay_min(self, samples: int = 64) -> float:
        ts = np.linspace(0.0, self.horizon, samples)
        xs = np.linspace(0.0, self.x_max, samples)
        return float(np.min(self.decay(ts[:, None], xs[None, :])))

    def cfl_step(self, safety: float = 0.9) -> float:
        return safety * self.h / self.velocity_range()[1]


@dataclass
class TransportState:
    """Cell averages plus outflow accounting at the right boundary."""

    problem: TransportProblem
    values: np.ndarray
    time: float
    outflow: float = 0.0
    history: list | None = None        # (time, mass, l1 norm) per step if recorded

    def mass(self) -> float:
        return float(np.sum(self.values) * self.problem.h)

    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.problem.h)


def sample_initial(problem: TransportProblem, fn) -> np.ndarray:
    return np.asarray(fn(problem.centers()), dtype=float)


def box_initial(lo: float, hi: float):
    return lambda x: ((x > lo) & (x < hi)).astype(float)


def gaussian_initial(center: float, width: float):
    return lambda x: np.exp(-((x - center) ** 2) / (2.0 * width**2))


def transport_solve(problem: TransportProblem, s: float, t: float,
                    f0: np.ndarray, steps: int | None = None,
                    cfl_safety: float = 0.9,
                    record_history: bool = False) -> TransportState:
    """March f0 from time s to t with the conservative upwind update

        f_i <- f_i - (dt/h)(g_{i+1/2} f_i - g_{i-1/2} f_{i-1}) - dt mu_i f_i

    Coefficients are frozen at the step midpoint.  If `steps` is given it
    must satisfy the CFL bound dt <= cfl_safety * h / sup g; there is no
    silent sub-stepping.
    """
    if not 0.0 <= s <= t <= problem.horizon:
        raise DomainError(f"need 0 <= s <= t <= {problem.horizon}")
    f = np.asarray(f0, dtype=float).copy()
    if f.shape != (problem.cells,):
        raise ConfigurationError(f"initial data must have {problem.cells} cells")
    if t == s:
        return TransportState(problem, f, t, history=[] if record_history else None)

    dt_max = problem.cfl_step(cfl_safety)
    if steps is None:
        steps = int(np.ceil((t - s) / dt_max))
    dt = (t - s) / steps
    if dt > dt_max * (1.0 + 1e-12):
        raise ConfigurationError(
            f"CFL violated: dt={dt:.3e} exceeds {dt_max:.3e}; no silent sub-stepping")

    h = problem.h
    faces = problem.faces()
    centers = problem.centers()
    outflow = 0.0
    history = [] if record_history else None
    for k in range(steps):
        t_mid = s + (k + 0.5) * dt
        g_face = problem.velocity(t_mid, faces)
        mu = problem.decay(t_mid, centers)
        upwind = np.concatenate([[0.0], f[:-1]])        # inflow value 0 at x=0
        flux_out = g_face[1:] * f
        flux_in = g_face[:-1] * upwind
        outflow += dt * flux_out[-1]                    # mass leaving this step
        f = f - (dt / h) * (flux_out - flux_in) - dt * mu * f
        if history is not None:
            history.append((s + (k + 1) * dt, float(np.sum(f) * h),
                            float(np.sum(np.abs(f)) * h)))
    return TransportState(problem, f, t, outflow=outflow, history=history)


def characteristics_oracle(problem: TransportProblem, s: float, t: float,
                           f0_fn) -> np.ndarray:
    """Exact solution for constant g, mu:
    f(t,x) = e^{-mu (t-s)} f0(x - g (t-s)) for x >= g (t-s), else 0."""
    if not (problem.velocity.is_constant and problem.decay.is_constant):
        raise UnsupportedError("characteristics oracle needs constant coefficients")
    g = problem.velocity.constant_value()
    mu = problem.decay.constant_value()
    shift = g * (t - s)
    x = problem.centers()
    vals = np.where(x >= shift, f0_fn(x - shift), 0.0)
    return np.exp(-mu * (t - s)) * vals


@dataclass(frozen=True)
class TransportFamilyReport:
    cocycle_defect: float
    decay_ratio: float            # ||U(t,s)f0||_1 / ||f0||_1
    decay_bound: float            # e^{-mu_min (t-s)}
    decay_ok: bool
    mass_balance_defect: float    # per-run conservation residual


def transport_family_checks(problem: TransportProblem, r: float, s: float,
                            t: float, f0: np.ndarray) -> TransportFamilyReport:
    """Cocycle on aligned step ladders, L1 decay against e^{-mu_min dt},
    and the discrete mass balance (decay sinks + boundary outflow).

    The midpoint is snapped onto a global CFL-safe ladder so both legs
    reuse exactly the step times of the single run; the composed solve
    then reproduces it to roundoff.
    """
    if not r <= s <= t:
        raise DomainError("need r <= s <= t")
    n_total = max(2, int(np.ceil((t - r) / problem.cfl_step())))
    dt = (t - r) / n_total
    n1 = min(max(1, int(round((s - r) / dt))), n_total - 1)
    s_used = r + n1 * dt

    one = transport_solve(problem, r, t, f0, n_total)
    legA = transport_solve(problem, r, s_used, f0, n1)
    legB = transport_solve(problem, s_used, t, legA.values, n_total - n1)
    ref = max(one.l1_norm(), 1e-300)
    defect = float(np.sum(np.abs(legB.values - one.values)) * problem.h) / ref

    f0_l1 = float(np.sum(np.abs(f0)) * problem.h)
    ratio = one.l1_norm() / max(f0_l1, 1e-300)
    mu_min = problem.decay_min()
    bound = float(np.exp(-mu_min * (t - r)))

    # mass balance over the whole run: initial = final + outflow + decay sink
    balance = _mass_balance_defect(problem, r, t, f0, n_total)
    return TransportFamilyReport(
        cocycle_defect=defect, decay_ratio=ratio, decay_bound=bound,
        decay_ok=bool(ratio <= bound * (1.0 + 10.0 * problem.h)),
        mass_balance_defect=balance)


def _mass_balance_defect(problem: TransportProblem, s: float, t: float,
                         f0: np.ndarray, steps: int) -> float:
    """Max per-step defect of mass_new - mass_old + dt(sum mu f h) + outflux."""
    f = np.asarray(f0, dtype=float).copy()
    dt = (t - s) / steps
    h = problem.h
    faces = problem.faces()
    centers = problem.centers()
    worst = 0.0
    for k in range(steps):
        t_mid = s + (k + 0.5) * dt
        g_face = problem.velocity(t_mid, faces)
        mu = problem.decay(t_mid, centers)
        upwind = np.concatenate([[0.0], f[:-1]])
        flux_out = g_face[1:] * f
        flux_in = g_face[:-1] * upwind
        f_new = f - (dt / h) * (flux_out - flux_in) - dt * mu * f
        lhs = np.sum(f_new) * h - np.sum(f) * h
        rhs = -dt * np.sum(mu * f) * h - dt * flux_out[-1]
        scale = max(abs(np.sum(f) * h), 1e-300)
        worst = max(worst, abs(lhs - rhs) / scale)
        f = f_new
    return worst


def convergence_study(problem_factory, s: float, t: float, f0_fn,
                      cell_counts, steps_factor: float = 1.0):
    """L1 errors against the characteristics oracle over grid refinements.

    `problem_factory(cells)` builds the problem at each resolution; dt/h
    is held fixed across refinements.
    """
    errors = []
    for cells in cell_counts:
        problem = problem_factory(int(cells))
        f0 = sample_initial(problem, f0_fn)
        steps = int(np.ceil((t - s) / (problem.cfl_step() * steps_factor)))
        state = transport_solve(problem, s, t, f0, steps)
        exact = characteristics_oracle(problem, s, t, f0_fn)
        errors.append(float(np.sum(np.abs(state.values - exact)) * problem.h))
    return errors

"""Perturbation families B(t) and the variation-of-constants solver.

Three families:

* Mollifier: the moving box average, B(0) = Id and for t > 0 the
  multiplier prod_j sinc(t xi_j).  Continuous but not Lipschitz into L2;
  Lipschitz into the order -m dual scale.
* MultiplierFamily: c(t) times a fixed rational profile of |xi|^2.
  Commutes with every symbol, which yields a closed-form perturbed
  propagator used as the solver oracle.
* SmoothingComposite: order-m smoothing multiplier followed by physical
  multiplication with b(t, x) = c(t) w(x); genuinely non-commuting.

The solver marches the Volterra equation
V(t,s)x = U(t,s)x + int_s^t U_-1(t,sigma) B(sigma) V(sigma,s)x dsigma
with trapezoid quadrature, resolving the implicit endpoint by Picard
sweeps (the kernel is bounded on the discretized space, so the
contraction factor is about dsigma ||B|| / 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ConvergenceError, DomainError, UnsupportedError
from .evolution import PropagatorEngine
from .spectral import (FREQUENCY, Grid, GridFunction, extrapolated_norm,
                       gaussian_bump, negative_sobolev, norm)
from .symbols import CoefficientFunction, SymbolSpec, constant


class Mollifier:
    """Box-average family: identity at t = 0, sinc multiplier for t > 0."""

    def __init__(self, dim: int = 1):
        if dim < 1:
            raise ConfigurationError("mollifier dimension must be >= 1")
        self.dim = dim

    def multiplier(self, t: float, xi_axes) -> np.ndarray:
        if t == 0.0:
            return np.asarray(1.0 + 0.0j)
        total = np.asarray(1.0 + 0.0j)
        for ax in xi_axes:
            total = total * np.sinc(t * ax / np.pi)   # sin(t xi)/(t xi)
        return total

    def apply(self, t: float, f: GridFunction) -> GridFunction:
        if t == 0.0:
            return f.to_frequency()
        fhat = f.to_frequency()
        m = np.broadcast_to(self.multiplier(t, f.grid.xi_axes()), f.grid.shape)
        return GridFunction(f.grid, FREQUENCY, fhat.values * m)

    diagonal = True
    has_integral = False


class MultiplierFamily:
    """m_B(t, xi) = c(t) * P(|xi|^2)/Q(|xi|^2), commuting with every symbol."""

    def __init__(self, coefficient: CoefficientFunction = None,
                 profile_num: tuple = (1.0,), profile_den: tuple = (1.0, 1.0)):
        self.coefficient = coefficient if coefficient is not None else constant(1.0)
        self.profile_num = tuple(float(c) for c in profile_num)
        self.profile_den = tuple(float(c) for c in profile_den)
        if not self.profile_den or all(c == 0 for c in self.profile_den):
            raise ConfigurationError("rational profile needs a nonzero denominator")

    def _profile(self, xi_axes) -> np.ndarray:
        r2 = np.asarray(0.0)
        for ax in xi_axes:
            r2 = r2 + ax**2
        num = np.zeros_like(r2, dtype=float)
        for k, c in enumerate(self.profile_num):
            num = num + c * r2**k
        den = np.zeros_like(r2, dtype=float)
        for k, c in enumerate(self.profile_den):
            den = den + c * r2**k
        return num / den

    def multiplier(self, t: float, xi_axes) -> np.ndarray:
        return self.coefficient(t) * self._profile(xi_axes)

    def integral(self, s: float, t: float, xi_axes) -> np.ndarray:
        """Closed-form integral of m_B over [s, t] (the oracle ingredient)."""
        dc = self.coefficient.antiderivative(t) - self.coefficient.antiderivative(s)
        return dc * self._profile(xi_axes)

    def apply(self, t: float, f: GridFunction) -> GridFunction:
        fhat = f.to_frequency()
        m = np.broadcast_to(np.asarray(self.multiplier(t, f.grid.xi_axes()),
                                       dtype=complex), f.grid.shape)
        return GridFunction(f.grid, FREQUENCY, fhat.values * m)

    diagonal = True
    has_integral = True


class SmoothingComposite:
    """B(t) f = b(t, .) * (1 + |xi|^2)^{-order/2} f with b(t,x) = c(t) w(x).

    The physical multiplication does not commute with symbol multipliers,
    giving the genuinely non-commuting test case.  w defaults to a
    Gaussian bump centered in the box.
    """

    def __init__(self, order: int = 2, coefficient: CoefficientFunction = None,
                 window=None):
        if order < 1:
            raise ConfigurationError("smoothing order must be >= 1")
        self.order = order
        self.coefficient = (coefficient if coefficient is not None
                            else CoefficientFunction(const=1.0, poly=((1, 1.0),)))
        self.window = window      # callable grid -> GridFunction, or None
        self._window_cache: dict = {}

    def _window_values(self, grid: Grid) -> np.ndarray:
        key = (grid.dim, grid.n, grid.box)
        if key not in self._window_cache:
            w = self.window(grid) if self.window is not None else gaussian_bump(grid)
            self._window_cache[key] = w.to_physical().values.real
        return self._window_cache[key]

    def apply(self, t: float, f: GridFunction) -> GridFunction:
        grid = f.grid
        smooth = (1.0 + grid.xi_squared()) ** (-self.order / 2.0)
        fhat = f.to_frequency()
        smoothed = GridFunction(grid, FREQUENCY, fhat.values * smooth)
        phys = smoothed.to_physical()
        b = self.coefficient(t) * self._window_values(grid)
        return GridFunction(grid, "physical", phys.values * b).to_frequency()

    diagonal = False
    has_integral = False


def apply_perturbation(family, t: float, f: GridFunction,
                       horizon: float | None = None) -> GridFunction:
    """B(t) f in frequency representation."""
    if t < 0 or (horizon is not None and t > horizon):
        raise DomainError(f"perturbation time {t} outside [0, {horizon}]")
    return family.apply(t, f)


# -- regularity measurement ---------------------------------------------------

@dataclass(frozen=True)
class SlopeFit:
    slope: float
    residual: float        # rms residual of the log10-log10 least squares fit
    separations: int


def loglog_fit(xs, ys) -> SlopeFit:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 3:
        raise ConfigurationError("need at least 3 points for a log-log fit")
    if np.any(ys <= 0):
        raise ConfigurationError("log-log fit requires positive values")
    lx, ly = np.log10(xs), np.log10(ys)
    design = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = float(np.sqrt(np.mean((design @ coef - ly) ** 2)))
    return SlopeFit(slope=float(coef[0]), residual=resid, separations=int(xs.size))


DEFAULT_SEPARATIONS = tuple(2.0 ** (-k) for k in range(1, 7))


@dataclass(frozen=True)
class RegularityReport:
    """Per-vector regularity of t -> B(t)f measured on dyadic separations.

    Moduli are sups over a base-point grid (including t = 0) of
    ||B(t0 + delta) f - B(t0) f|| in each gauge; Lipschitz constants into
    the X_{-1} models are max difference quotients over the same pairs.
    """

    sup_norm: list[float]                 # sup_t ||B(t) f||_L2 per vector
    lip_sobolev: list[float]              # quotients in W^{2,-m}
    lip_extrapolated: list[float]         # quotients in the gauge 1/|a(0,.)|
    slopes_l2: list[SlopeFit]
    slopes_sobolev: list[SlopeFit]
    slopes_extrapolated: list[SlopeFit]
    separations: tuple[float, ...]


def perturbation_regularity_report(family, vectors, spec: SymbolSpec,
                                   separations=DEFAULT_SEPARATIONS,
                                   base_points: int = 16,
                                   horizon: float | None = None) -> RegularityReport:
    if len(separations) < 3:
        raise ConfigurationError("need at least 3 separations")
    if horizon is None:
        horizon = spec.horizon
    gauges = {
        "sobolev": negative_sobolev(-float(spec.order)),
        "extrapolated": extrapolated_norm(spec, 0.0),
    }
    sup_norm, lip_sob, lip_ext = [], [], []
    sl_l2, sl_sob, sl_ext = [], [], []
    t_grid = np.linspace(0.0, horizon, 24)
    for f in vectors:
        fhat = f.to_frequency()
        sup_norm.append(max(norm(apply_perturbation(family, float(t), fhat))
                            for t in t_grid))
        mods = {"l2": [], "sobolev": [], "extrapolated": []}
        quot = {"sobolev": 0.0, "extrapolated": 0.0}
        for delta in separations:
            bases = np.concatenate([[0.0],
                                    np.linspace(1e-3, horizon - delta, base_points)])
            best = {"l2": 0.0, "sobolev": 0.0, "extrapolated": 0.0}
            for b in bases:
                g0 = apply_perturbation(family, float(b), fhat)
                g1 = apply_perturbation(family, float(b + delta), fhat)
                diff = GridFunction(f.grid, FREQUENCY, g1.values - g0.values)
                best["l2"] = max(best["l2"], norm(diff))
                for name, gauge in gauges.items():
                    val = norm(diff, gauge)
                    best[name] = max(best[name], val)
                    quot[name] = max(quot[name], val / delta)
            for name in mods:
                mods[name].append(best[name])
        lip_sob.append(quot["sobolev"])
        lip_ext.append(quot["extrapolated"])

        def fit(values):
            # a time-constant family has identically zero moduli: no slope
            if max(values) == 0.0:
                return SlopeFit(slope=float("nan"), residual=0.0,
                                separations=len(values))
            return loglog_fit(separations, values)

        sl_l2.append(fit(mods["l2"]))
        sl_sob.append(fit(mods["sobolev"]))
        sl_ext.append(fit(mods["extrapolated"]))
    return RegularityReport(sup_norm=sup_norm, lip_sobolev=lip_sob,
                            lip_extrapolated=lip_ext, slopes_l2=sl_l2,
                            slopes_sobolev=sl_sob, slopes_extrapolated=sl_ext,
                            separations=tuple(separations))


# -- Volterra solver ----------------------------------------------------------

@dataclass(frozen=True)
class VolterraSolver:
    steps: int = 1024
    tolerance: float = 1e-12
    max_sweeps: int = 20

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigurationError("need at least one step")
        if self.tolerance <= 0:
            raise ConfigurationError("tolerance must be positive")


@dataclass
class Trajectory:
    sigmas: np.ndarray
    states: list[GridFunction]          # V(sigma_k, s) x, frequency rep
    sweeps_max: int
    last_residual: float
    contraction: float                  # estimated Picard contraction factor

    def final(self) -> GridFunction:
        return self.states[-1]


def _l2(values: np.ndarray, w: float) -> float:
    return float(np.sqrt(np.sum(np.abs(values) ** 2) * w))


def solve_perturbed(engine: PropagatorEngine, family, s: float, t: float,
                    x: GridFunction, solver: VolterraSolver = VolterraSolver(),
                    gauge_multiplier: np.ndarray | None = None) -> Trajectory:
    """March the variation-of-constants equation on a uniform sigma grid.

    Trapezoid in sigma; the implicit endpoint is resolved by Picard sweeps
    to the solver tolerance.  `gauge_multiplier` conjugates the whole
    solve by a diagonal weight (used for the X_{-1}-gauge consistency
    check); the returned states are already conjugated back.
    """
    if engine.method != "exact":
        raise ConfigurationError("the Volterra solver requires the exact engine")
    if not 0.0 <= s <= t <= engine.spec.horizon:
        raise DomainError(f"need 0 <= s <= t <= {engine.spec.horizon}")
    grid = engine.grid
    w = grid.cell_volume
    M = solver.steps
    sigmas = np.linspace(s, t, M + 1)
    dsig = (t - s) / M

    gm = gauge_multiplier
    def b_apply(tau: float, values: np.ndarray) -> np.ndarray:
        f = GridFunction(grid, FREQUENCY, values if gm is None else values / gm)
        out = family.apply(tau, f).values
        return out if gm is None else out * gm

    xhat = x.to_frequency().values
    if gm is not None:
        xhat = xhat * gm
    xnorm = _l2(xhat, w)

    states = [xhat.copy()]
    history = np.zeros(grid.shape, dtype=complex)
    current = xhat.copy()                    # U(sigma_k, s) x
    sweeps_max, last_resid = 0, 0.0
    for k in range(1, M + 1):
        step_mult = np.exp(-engine.exponent(float(sigmas[k - 1]), float(sigmas[k])))
        g_prev = b_apply(float(sigmas[k - 1]), states[k - 1])
        weight = 0.5 if k == 1 else 1.0
        history = step_mult * (history + weight * g_prev)
        current = step_mult * current
        rhs = current + dsig * history

        v = rhs + 0.5 * dsig * b_apply(float(sigmas[k]), states[k - 1])
        converged = False
        for sweep in range(1, solver.max_sweeps + 1):
            v_next = rhs + 0.5 * dsig * b_apply(float(sigmas[k]), v)
            resid = _l2(v_next - v, w) / max(_l2(v_next, w), 1e-300)
            v = v_next
            if resid <= solver.tolerance:
                sweeps_max = max(sweeps_max, sweep)
                last_resid = resid
                converged = True
                break
        if not converged:
            raise ConvergenceError(
                f"Picard failed to contract at node {k} (sigma={sigmas[k]:.6g})",
                residual=resid)
        states.append(v)

    if gm is not None:
        states = [v / gm for v in states]
    bnorm = max(_l2(b_apply(s, xhat), w) / max(xnorm, 1e-300), 1e-300)
    return Trajectory(
        sigmas=sigmas,
        states=[GridFunction(grid, FREQUENCY, v) for v in states],
        sweeps_max=sweeps_max, last_residual=last_resid,
        contraction=0.5 * dsig * bnorm)


def commuting_oracle(engine: PropagatorEngine, family: MultiplierFamily,
                     s: float, t: float, x: GridFunction) -> GridFunction:
    """Closed-form perturbed propagator exp(-int a + int m_B) x for
    commuting multiplier perturbations."""
    if not getattr(family, "has_integral", False):
        raise UnsupportedError("oracle requires a multiplier family with "
                               "closed-form time integrals")
    axes = engine.grid.xi_axes()
    expo = -engine.spec.integral_on_axes(s, t, axes) + family.integral(s, t, axes)
    mult = np.broadcast_to(np.exp(expo), engine.grid.shape)
    return GridFunction(engine.grid, FREQUENCY, x.to_frequency().values * mult)


def duhamel_residual(trajectory: Trajectory, engine: PropagatorEngine, family,
                     s: float, x: GridFunction, gl_nodes: int = 4) -> float:
    """Max over nodes of || V_k - U(sigma_k,s)x - GL-quadrature of the
    Duhamel integral || / ||x||, with V linearly interpolated at the
    Gauss-Legendre nodes inside each step."""
    grid = engine.grid
    w = grid.cell_volume
    sig = trajectory.sigmas
    xhat = x.to_frequency().values
    xnorm = max(_l2(xhat, w), 1e-300)
    nodes, weights = np.polynomial.legendre.leggauss(gl_nodes)

    acc = np.zeros(grid.shape, dtype=complex)      # integral transported to sig[j]
    current = xhat.copy()
    worst = 0.0
    for j in range(len(sig) - 1):
        lo, hi = float(sig[j]), float(sig[j + 1])
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        step_mult = np.exp(-engine.exponent(lo, hi))
        contrib = np.zeros(grid.shape, dtype=complex)
        for xn, wn in zip(nodes, weights):
            tau = mid + half * xn
            frac = (tau - lo) / (hi - lo)
            v_tau = ((1.0 - frac) * trajectory.states[j].values
                     + frac * trajectory.states[j + 1].values)
            g = family.apply(tau, GridFunction(grid, FREQUENCY, v_tau)).values
            transport = np.exp(-engine.exponent(tau, hi))
            contrib += (half * wn) * transport * g
        acc = step_mult * acc + contrib
        current = step_mult * current
        resid = _l2(trajectory.states[j + 1].values - current - acc, w) / xnorm
        worst = max(worst, resid)
    return worst


@dataclass(frozen=True)
class PerturbedFamilyReport:
    cocycle_defect: float
    norms: list[float]                 # ||V(sigma_k, s) x||_L2 along the run
    envelope_m: float
    envelope_omega: float
    envelope_ok: bool


def perturbed_family_checks(engine: PropagatorEngine, family, s: float,
                            r: float, t: float, x: GridFunction,
                            solver: VolterraSolver = VolterraSolver()) -> PerturbedFamilyReport:
    """Evolution-family axioms for V: cocycle defect through the midpoint r,
    and the fitted growth envelope M_V e^{omega_V (sigma - s)} that the
    trajectory norms must stay below (restriction-to-X claim).

    Each leg runs with its own ladder of `solver.steps` steps, so the
    defect measures genuine discretization (O(dsigma^2)); aligned ladders
    would telescope to roundoff.
    """
    if not s < r < t:
        raise DomainError("need s < r < t")
    full = solve_perturbed(engine, family, s, t, x, solver)
    leg1 = solve_perturbed(engine, family, s, r, x, solver)
    leg2 = solve_perturbed(engine, family, r, t, leg1.final(), solver)
    w = engine.grid.cell_volume
    xnorm = max(_l2(x.to_frequency().values, w), 1e-300)
    defect = _l2(leg2.final().values - full.final().values, w) / xnorm

    norms = [norm(v) for v in full.states]
    elapsed = full.sigmas - s
    logs = np.log(np.maximum(norms, 1e-300))
    design = np.vstack([elapsed, np.ones_like(elapsed)]).T
    coef, *_ = np.linalg.lstsq(design, logs, rcond=None)
    omega_v = float(coef[0])
    m_v = float(np.exp(np.max(logs - omega_v * elapsed)))
    envelope = m_v * np.exp(omega_v * elapsed)
    ok = bool(np.all(norms <= envelope * (1.0 + 1e-9)) and np.all(np.isfinite(norms)))
    return PerturbedFamilyReport(cocycle_defect=float(defect), norms=norms,
                                 envelope_m=m_v, envelope_omega=omega_v,
                                 envelope_ok=ok)


@dataclass(frozen=True)
class DomainBoundReport:
    """Per-vector hypotheses of the dom -> F1 perturbation theorem."""

    sup_graph_norm: list[float]        # sup_t (||A(0) B(t) f|| + ||B(t) f||)
    lipschitz_l2: list[float]          # Lip constant of t -> B(t) f in L2
    band_growth: float                 # graph-norm ratio under band doubling
    verdicts: list[bool]
    bounded_in_band: bool


def check_domain_to_favard(spec: SymbolSpec, grid: Grid, family, vectors,
                           rough: GridFunction | None = None,
                           cap: float = 1e8,
                           growth_limit: float = 1.5) -> DomainBoundReport:
    """Bounded into the graph-norm space (F1 proxy, valid since F1 = dom in
    the reflexive model) and Lipschitz into X: the hypotheses under which a
    perturbed family stays a well-posed system at the X level.

    The band probe applies the family to a rough vector truncated at two
    band limits; a growing graph norm flags an unbounded family (identity
    perturbations fail, genuine order-m smoothers pass).
    """
    from .semigroup import FrozenOperator

    op0 = FrozenOperator(spec, 0.0)
    t_grid = np.linspace(0.0, spec.horizon, 12)
    deltas = [1e-3, 1e-2, 1e-1]
    sup_graph, lips, verdicts = [], [], []
    for f in vectors:
        fhat = f.to_frequency()
        worst = 0.0
        for t in t_grid:
            g = apply_perturbation(family, float(t), fhat)
            worst = max(worst, norm(op0.apply(g)) + norm(g))
        sup_graph.append(worst)
        lip = 0.0
        for delta in deltas:
            for b in np.linspace(0.0, spec.horizon - delta, 8):
                g0 = apply_perturbation(family, float(b), fhat)
                g1 = apply_perturbation(family, float(b + delta), fhat)
                diff = GridFunction(grid, FREQUENCY, g1.values - g0.values)
                lip = max(lip, norm(diff) / delta)
        lips.append(lip)
        verdicts.append(bool(worst <= cap and lip <= cap))

    if rough is None:
        from .spectral import indicator
        rough = indicator(grid)
    ratios = []
    for band in (grid.n // 8, grid.n // 4):
        fhat = rough.to_frequency().values.copy()
        k = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
        mask = np.zeros(grid.shape, dtype=bool)
        for j in range(grid.dim):
            shape = [1] * grid.dim
            shape[j] = grid.n
            mask |= np.broadcast_to(np.abs(k.reshape(shape)) > band, grid.shape)
        fhat[mask] = 0.0
        probe = GridFunction(grid, FREQUENCY, fhat)
        worst = 0.0
        for t in t_grid:
            g = apply_perturbation(family, float(t), probe)
            worst = max(worst, norm(op0.apply(g)) + norm(g))
        ratios.append(worst)
    band_growth = ratios[1] / max(ratios[0], 1e-300)
    bounded = bool(band_growth <= growth_limit)
    return DomainBoundReport(sup_graph_norm=sup_graph, lipschitz_l2=lips,
                             band_growth=float(band_growth),
                             verdicts=[v and bounded for v in verdicts],
                             bounded_in_band=bounded)

"""Time-dependent polynomial symbols a(t, xi) with closed-form coefficients.

A symbol is a(t, xi) = sum over multi-indices |alpha| <= m of
a_alpha(t) * (i xi)^alpha.  Coefficient functions are restricted to a
family (constant + polynomial + trigonometric, plus optional step terms
for degenerate configurations) that has closed-form derivatives,
antiderivatives and Lipschitz bounds; the exact propagator and all
certification routines rely on those closed forms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class CoefficientFunction:
    """Closed-form scalar coefficient c(t) on [0, T].

    c(t) = const + sum_k poly[k][1] * t^poly[k][0]
                 + sum_j (cos_coef_j * cos(w_j t) + sin_coef_j * sin(w_j t))
                 + sum_j jump_j * 1[t >= t0_j]

    ``poly`` entries are (degree >= 1, complex coefficient); ``trig``
    entries are (angular frequency > 0, cos coefficient, sin coefficient);
    ``steps`` entries are (jump time, complex jump).  Step terms exist only
    to build deliberately non-Lipschitz configurations.
    """

    const: complex = 0.0
    poly: tuple[tuple[int, complex], ...] = ()
    trig: tuple[tuple[float, complex, complex], ...] = ()
    steps: tuple[tuple[float, complex], ...] = ()

    def __post_init__(self):
        for degree, _ in self.poly:
            if degree < 1:
                raise ConfigurationError(f"polynomial degree must be >= 1, got {degree}")
        for omega, _, _ in self.trig:
            if omega <= 0:
                raise ConfigurationError(f"trig frequency must be > 0, got {omega}")

    def __call__(self, t):
        t = np.asarray(t)
        value = np.full(t.shape, complex(self.const), dtype=complex)
        for degree, coef in self.poly:
            value = value + coef * t**degree
        for omega, ccos, csin in self.trig:
            value = value + ccos * np.cos(omega * t) + csin * np.sin(omega * t)
        for t0, jump in self.steps:
            value = value + jump * (t >= t0)
        return value[()] if value.ndim == 0 else value

    def derivative(self, t):
        """d/dt c(t); step terms contribute 0 away from their jumps."""
        t = np.asarray(t)
        value = np.zeros(t.shape, dtype=complex)
        for degree, coef in self.poly:
            value = value + degree * coef * t ** (degree - 1)
        for omega, ccos, csin in self.trig:
            value = value + omega * (-ccos * np.sin(omega * t) + csin * np.cos(omega * t))
        return value[()] if value.ndim == 0 else value

    def antiderivative(self, t):
        """Antiderivative C(t) with C(0) = 0, exact for every term."""
        t = np.asarray(t)
        value = np.asarray(complex(self.const) * t, dtype=complex)
        for degree, coef in self.poly:
            value = value + coef * t ** (degree + 1) / (degree + 1)
        for omega, ccos, csin in self.trig:
            value = value + ccos * np.sin(omega * t) / omega
            value = value + csin * (1.0 - np.cos(omega * t)) / omega
        for t0, jump in self.steps:
            value = value + jump * np.maximum(t - t0, 0.0)
        return value[()] if value.ndim == 0 else value

    def lipschitz_bound(self, horizon: float) -> float:
        """Closed-form upper bound for the Lipschitz constant on [0, horizon].

        Term-by-term sup of |c'|: sum_k k |coef_k| T^(k-1) plus
        sum_j w_j (|cos coef| + |sin coef|).  Infinite if a step term jumps.
        """
        bound = 0.0
        for degree, coef in self.poly:
            bound += degree * abs(coef) * horizon ** (degree - 1)
        for omega, ccos, csin in self.trig:
            bound += omega * (abs(ccos) + abs(csin))
        if any(jump != 0 for _, jump in self.steps):
            return float("inf")
        return bound

    @property
    def is_constant(self) -> bool:
        return not self.poly and not self.trig and not self.steps

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(t0 for t0, jump in self.steps if jump != 0)


def constant(value) -> CoefficientFunction:
    return CoefficientFunction(const=complex(value))


@dataclass(frozen=True)
class SymbolSpec:
    """A symbol a(t, xi) = sum_{|alpha| <= m} a_alpha(t) (i xi)^alpha.

    ``coefficients`` maps multi-indices (length-d tuples of nonneg ints)
    to coefficient functions.  At least one entry of full order m must be
    present.
    """

    dim: int
    order: int
    horizon: float
    coefficients: dict[tuple[int, ...], CoefficientFunction] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1 or self.order < 1 or self.horizon <= 0:
            raise ConfigurationError("need dim >= 1, order >= 1, horizon > 0")
        for alpha in self.coefficients:
            if len(alpha) != self.dim or any(a < 0 for a in alpha):
                raise ConfigurationError(f"bad multi-index {alpha} for dim {self.dim}")
            if sum(alpha) > self.order:
                raise ConfigurationError(f"|{alpha}| exceeds order {self.order}")
        if not any(sum(alpha) == self.order for alpha in self.coefficients):
            raise ConfigurationError("no multi-index of full order present")

    def _check_time(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.horizon):
            raise DomainError(f"time {t} outside [0, {self.horizon}]")
        return t

    def eval(self, t, xi) -> complex:
        """a(t, xi) at a single time and frequency vector."""
        self._check_time(t)
        return self._accumulate(t, xi, principal_only=False)

    def eval_principal(self, t, xi) -> complex:
        """Principal part a_m(t, xi): only the |alpha| = m terms."""
        self._check_time(t)
        return self._accumulate(t, xi, principal_only=True)

    def _accumulate(self, t, xi, principal_only: bool):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if xi.shape[0] != self.dim:
            raise DomainError(f"frequency vector has dim {xi.shape[0]}, expected {self.dim}")
        total = 0.0 + 0.0j
        for alpha, coef in self.coefficients.items():
            if principal_only and sum(alpha) != self.order:
                continue
            mono = 1.0 + 0.0j
            for j, a_j in enumerate(alpha):
                mono *= (1j * xi[j]) ** a_j
            total += coef(t) * mono
        return total

    def monomials(self, xi_axes: tuple[np.ndarray, ...]) -> dict[tuple[int, ...], np.ndarray]:
        """(i xi)^alpha on broadcastable frequency axes, one array per alpha."""
        out = {}
        for alpha in self.coefficients:
            mono = np.asarray(1.0 + 0.0j)
            for j, a_j in enumerate(alpha):
                if a_j:
                    mono = mono * (1j * xi_axes[j]) ** a_j
            out[alpha] = mono
        return out

    def on_axes(self, t, xi_axes: tuple[np.ndarray, ...]) -> np.ndarray:
        """a(t, .) evaluated on broadcastable frequency axes, scalar t."""
        self._check_time(t)
        monos = self.monomials(xi_axes)
        total = np.asarray(0.0 + 0.0j)
        for alpha, coef in self.coefficients.items():
            total = total + coef(t) * monos[alpha]
        return total

    def integral_on_axes(self, s, t, xi_axes: tuple[np.ndarray, ...]) -> np.ndarray:
        """Closed-form integral of a(tau, .) over tau in [s, t], on axes."""
        self._check_time(s)
        self._check_time(t)
        monos = self.monomials(xi_axes)
        total = np.asarray(0.0 + 0.0j)
        for alpha, coef in self.coefficients.items():
            total = total + (coef.antiderivative(t) - coef.antiderivative(s)) * monos[alpha]
        return total

    def time_matrix(self, ts: np.ndarray, xi_axes: tuple[np.ndarray, ...],
                    principal_only: bool = False) -> np.ndarray:
        """a(t_i, xi) for a vector of times: shape (len(ts), *broadcast shape)."""
        ts = self._check_time(ts)
        monos = self.monomials(xi_axes)
        shape = np.broadcast_shapes(*(m.shape for m in monos.values()))
        total = np.zeros((len(ts),) + shape, dtype=complex)
        t_idx = (slice(None),) + (None,) * len(shape)
        for alpha, coef in self.coefficients.items():
            if principal_only and sum(alpha) != self.order:
                continue
            total += np.asarray(coef(ts))[t_idx] * np.broadcast_to(monos[alpha], shape)
        return total

    def coefficient_lipschitz(self) -> dict[tuple[int, ...], float]:
        """Per-multi-index closed-form Lipschitz bounds on [0, T]."""
        return {alpha: coef.lipschitz_bound(self.horizon)
                for alpha, coef in self.coefficients.items()}

    def breakpoints(self) -> tuple[float, ...]:
        pts = set()
        for coef in self.coefficients.values():
            pts.update(coef.breakpoints())
        return tuple(sorted(p for p in pts if 0.0 < p < self.horizon))

    @property
    def is_autonomous(self) -> bool:
        return all(c.is_constant for c in self.coefficients.values())


@dataclass(frozen=True)
class EllipticityReport:
    """Measured strong-ellipticity constants with a pass/fail verdict."""

    constant: float            # c: min of Re a_m over times x unit sphere
    lower_bound: float         # omega: min of Re a over times x (grid + 0)
    verdict: bool
    witness_constant: tuple    # (t, xi) achieving c
    witness_lower: tuple       # (t, xi) achieving omega
    time_samples: int
    margin: float              # max possible dip of Re a_m between t-samples


def unit_sphere_samples(dim: int, count: int) -> np.ndarray:
    """Deterministic points on the unit sphere, shape (count, dim).

    d = 1 reduces to {-1, +1}; higher d uses a seeded uniform draw,
    sufficient because a_m is continuous and homogeneous.
    """
    if count < 1:
        raise ConfigurationError("need at least one sphere sample")
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    rng = np.random.default_rng(180)
    pts = rng.standard_normal((count, dim))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def certify_ellipticity(spec: SymbolSpec, time_samples: int = 512,
                        sphere_samples: int = 64,
                        frequencies: np.ndarray | None = None) -> EllipticityReport:
    """Measure c with Re a_m(t, xi) >= c |xi|^m and omega with Re a >= omega.

    c is minimized over a uniform t-grid times unit-sphere samples
    (homogeneity makes the sphere sufficient); omega over the same t-grid
    times ``frequencies`` (rows = frequency vectors) plus xi = 0.  Passing
    no frequencies uses the sphere points and 0.
    """
    if time_samples < 1:
        raise ConfigurationError("need at least one time sample")
    ts = np.linspace(0.0, spec.horizon, time_samples)
    sphere = unit_sphere_samples(spec.dim, sphere_samples)
    if frequencies is None:
        frequencies = sphere
    frequencies = np.vstack([frequencies, np.zeros((1, spec.dim))])

    axes_sphere = tuple(sphere[:, j] for j in range(spec.dim))
    principal = spec.time_matrix(ts, axes_sphere, principal_only=True)
    idx = np.unravel_index(np.argmin(principal.real), principal.shape)
    c_meas = float(principal.real[idx])
    wit_c = (float(ts[idx[0]]), sphere[idx[1]].tolist())

    axes_full = tuple(frequencies[:, j] for j in range(spec.dim))
    full = spec.time_matrix(ts, axes_full)
    jdx = np.unravel_index(np.argmin(full.real), full.shape)
    omega_meas = float(full.real[jdx])
    wit_o = (float(ts[jdx[0]]), frequencies[jdx[1]].tolist())

    lip_m = sum(b for alpha, b in spec.coefficient_lipschitz().items()
                if sum(alpha) == spec.order)
    dt = spec.horizon / max(time_samples - 1, 1)
    margin = 0.5 * dt * lip_m if np.isfinite(lip_m) else float("inf")

    return EllipticityReport(
        constant=c_meas,
        lower_bound=omega_meas,
        verdict=bool(c_meas > 0 and omega_meas > 0),
        witness_constant=wit_c,
        witness_lower=wit_o,
        time_samples=time_samples,
        margin=margin,
    )


def multi_indices(dim: int, max_order: int):
    """All multi-indices alpha with |alpha| <= max_order."""
    for combo in itertools.product(range(max_order + 1), repeat=dim):
        if sum(combo) <= max_order:
            yield combo


def heat_symbol(shift: float = 1.0, dim: int = 1, horizon: float = 1.0) -> SymbolSpec:
    """Autonomous a(xi) = |xi|^2 + shift, the generator Delta - shift."""
    coeffs = {}
    for j in range(dim):
        alpha = tuple(2 if k == j else 0 for k in range(dim))
        coeffs[alpha] = constant(-1.0)
    coeffs[(0,) * dim] = constant(shift)
    return SymbolSpec(dim=dim, order=2, horizon=horizon, coefficients=coeffs)


def oscillating_symbol(horizon: float = 2.0 * np.pi) -> SymbolSpec:
    """a(t, xi) = (2 + sin t) xi^2 + 1 in one dimension."""
    return SymbolSpec(
        dim=1, order=2, horizon=horizon,
        coefficients={
            (2,): CoefficientFunction(const=-2.0, trig=(((1.0, 0.0, -1.0)),)),
            (0,): constant(1.0),
        },
    )


def drift_symbol(horizon: float = 1.0) -> SymbolSpec:
    """Non-elliptic a(t, xi) = i xi (first-order drift, Re a_m = 0)."""
    return SymbolSpec(dim=1, order=1, horizon=horizon,
                      coefficients={(1,): constant(1.0)})

"""Grid functions on a periodic box and their transforms and norms.

Conventions fixed here and relied on everywhere else:

* The box is [0, L)^d sampled at N points per axis, spacing h = L/N.
* Frequencies are xi_k = 2 pi k / L for k in [-N/2, N/2), stored in FFT
  order (numpy fftfreq layout).
* Transforms are the unitary ("ortho") DFT, so Plancherel reads
  sum |f(x_j)|^2 h^d = sum |fhat_k|^2 h^d with the same weight on both
  sides; every norm below uses that weight.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError, NumericError, StateError

PHYSICAL = "physical"
FREQUENCY = "frequency"


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid: `dim` axes, `n` points per axis, edge `box`."""

    dim: int
    n: int
    box: float

    def __post_init__(self):
        if self.dim < 1 or self.n < 2 or self.box <= 0:
            raise ConfigurationError("need dim >= 1, n >= 2, box > 0")
        if self.n & (self.n - 1):
            raise ConfigurationError(f"points per axis must be a power of two, got {self.n}")

    @property
    def h(self) -> float:
        return self.box / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    def points_axis(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    def xi_axis(self) -> np.ndarray:
        """Frequencies 2 pi k / L in FFT order for one axis."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)

    def xi_axes(self) -> tuple[np.ndarray, ...]:
        """Per-axis frequency arrays shaped for broadcasting to `shape`."""
        axis = self.xi_axis()
        out = []
        for j in range(self.dim):
            shape = [1] * self.dim
            shape[j] = self.n
            out.append(axis.reshape(shape))
        return tuple(out)

    def xi_squared(self) -> np.ndarray:
        total = np.zeros(self.shape)
        for ax in self.xi_axes():
            total = total + ax**2
        return total

    def mode_index(self, k: int) -> int:
        """FFT-order index of integer mode k on one axis."""
        if not -self.n // 2 <= k < self.n // 2:
            raise DomainError(f"mode {k} outside grid band [{-self.n//2}, {self.n//2})")
        return k % self.n


@dataclass(frozen=True)
class GridFunction:
    """Complex values on a Grid, in physical or frequency representation."""

    grid: Grid
    representation: str
    values: np.ndarray

    def __post_init__(self):
        if self.representation not in (PHYSICAL, FREQUENCY):
            raise ConfigurationError(f"unknown representation {self.representation!r}")
        if self.values.shape != self.grid.shape:
            raise ConfigurationError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}")

    def to_frequency(self) -> "GridFunction":
        return transform(self, FREQUENCY) if self.representation == PHYSICAL else self

    def to_physical(self) -> "GridFunction":
        return transform(self, PHYSICAL) if self.representation == FREQUENCY else self


def transform(f: GridFunction, direction: str) -> GridFunction:
    """Unitary DFT between representations; rejects a no-op direction."""
    if direction == f.representation:
        raise StateError(f"function already in {direction} representation")
    if direction == FREQUENCY:
        values = np.fft.fftn(f.values, norm="ortho")
    elif direction == PHYSICAL:
        values = np.fft.ifftn(f.values, norm="ortho")
    else:
        raise ConfigurationError(f"unknown direction {direction!r}")
    return GridFunction(f.grid, direction, values)


def apply_multiplier(m, f: GridFunction) -> GridFunction:
    """Apply a Fourier multiplier; `m` maps per-axis frequency arrays to values.

    `m` receives the tuple of broadcastable frequency axes and must return
    an array broadcastable to the grid shape (or a scalar).  The result is
    in frequency representation.
    """
    fhat = f.to_frequency()
    values = np.broadcast_to(np.asarray(m(f.grid.xi_axes()), dtype=complex),
                             f.grid.shape)
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        xi = [float(ax.reshape(-1)[i]) for ax, i in zip(f.grid.xi_axes(), idx)]
        raise NumericError(f"multiplier non-finite at bin {idx} (xi={xi})",
                           witness={"bin": idx, "xi": xi})
    return GridFunction(f.grid, FREQUENCY, fhat.values * values)


@dataclass(frozen=True)
class NormSpec:
    """Which norm: Lp, NegativeSobolev (p=2, order s), or Extrapolated.

    Extrapolated is the weighted frequency norm || f / a(t0, .) ||_L2 for a
    reference symbol; it requires |a(t0, .)| > 0 on the whole grid.
    """

    variant: str                 # "lp" | "negative_sobolev" | "extrapolated"
    p: float = 2.0
    s: float = 0.0
    reference: object = None     # SymbolSpec for "extrapolated"
    reference_time: float = 0.0

    def __post_init__(self):
        if self.variant not in ("lp", "negative_sobolev", "extrapolated"):
            raise ConfigurationError(f"unknown norm variant {self.variant!r}")
        if self.variant == "lp" and not 1.0 < self.p < np.inf:
            raise ConfigurationError(f"Lp norm needs p in (1, inf), got {self.p}")
        if self.variant == "negative_sobolev" and self.p != 2.0:
            raise ConfigurationError("negative Sobolev norms are implemented for p = 2 only")
        if self.variant == "extrapolated" and self.reference is None:
            raise ConfigurationError("extrapolated norm needs a reference symbol")


L2 = NormSpec("lp", p=2.0)


def lp_norm(p: float) -> NormSpec:
    return NormSpec("lp", p=p)


def negative_sobolev(s: float) -> NormSpec:
    return NormSpec("negative_sobolev", s=s)


def extrapolated_norm(reference, reference_time: float = 0.0) -> NormSpec:
    return NormSpec("extrapolated", reference=reference, reference_time=reference_time)


def _frequency_weight(n: NormSpec, grid: Grid) -> np.ndarray:
    if n.variant == "negative_sobolev":
        return (1.0 + grid.xi_squared()) ** (n.s / 2.0)
    if n.variant == "extrapolated":
        a0 = np.broadcast_to(n.reference.on_axes(n.reference_time, grid.xi_axes()),
                             grid.shape)
        if np.any(np.abs(a0) == 0.0):
            raise NumericError("reference symbol vanishes on the grid; "
                               "extrapolated norm undefined")
        return 1.0 / np.abs(a0)
    raise ConfigurationError(f"no frequency weight for variant {n.variant}")


def norm(f: GridFunction, n: NormSpec = L2) -> float:
    """Norm functional.  L2 always goes through Plancherel (frequency side);
    other Lp are composite quadrature on physical values and are estimates.
    """
    if not np.all(np.isfinite(f.values)):
        raise NumericError("non-finite values in grid function")
    w = f.grid.cell_volume
    if n.variant == "lp":
        if n.p == 2.0:
            vals = f.to_frequency().values
            return float(np.sqrt(np.sum(np.abs(vals) ** 2) * w))
        vals = f.to_physical().values
        return float((np.sum(np.abs(vals) ** n.p) * w) ** (1.0 / n.p))
    weight = _frequency_weight(n, f.grid)
    vals = f.to_frequency().values
    return float(np.sqrt(np.sum((weight * np.abs(vals)) ** 2) * w))


def multiplier_operator_norm(m, grid: Grid, space: NormSpec = L2) -> float:
    """Operator norm of a multiplier on the discretized space.

    By Plancherel this is the max modulus over bins, in the plain L2 gauge
    and in any diagonal weighted gauge alike (the weight cancels).
    """
    if space.variant == "lp" and space.p != 2.0:
        raise ConfigurationError("multiplier operator norms are exact only at p = 2")
    values = np.broadcast_to(np.asarray(m(grid.xi_axes()), dtype=complex), grid.shape)
    if not np.all(np.isfinite(values)):
        raise NumericError("multiplier non-finite on the grid")
    return float(np.max(np.abs(values)))


def spectral_tail_fraction(f: GridFunction, inner_fraction: float = 0.5) -> float:
    """Fraction of L2 mass in bins with any |k_j| >= inner_fraction * N/2.

    Test functions should keep this tiny (the CLI warns above 1e-8);
    otherwise box truncation pollutes the spectral model.
    """
    fhat = f.to_frequency().values
    n = f.grid.n
    cutoff = inner_fraction * (n // 2)
    k_axis = np.fft.fftfreq(n, d=1.0 / n)
    mask = np.zeros(f.grid.shape, dtype=bool)
    for j in range(f.grid.dim):
        shape = [1] * f.grid.dim
        shape[j] = n
        mask |= np.abs(k_axis.reshape(shape)) >= cutoff
    total = np.sum(np.abs(fhat) ** 2)
    if total == 0.0:
        return 0.0
    return float(np.sum(np.abs(fhat[mask]) ** 2) / total)


# -- standard test vectors ---------------------------------------------------

def mode(grid: Grid, k, amplitude: complex = None) -> GridFunction:
    """Single Fourier mode e^{i xi_k . x}, unit L2 norm unless amplitude given.

    `k` is an integer (d = 1) or tuple of per-axis integers.
    """
    ks = (k,) if np.isscalar(k) else tuple(k)
    if len(ks) != grid.dim:
        raise DomainError(f"mode index {ks} has wrong dimension")
    values = np.zeros(grid.shape, dtype=complex)
    idx = tuple(grid.mode_index(kj) for kj in ks)
    if amplitude is None:
        amplitude = 1.0 / np.sqrt(grid.cell_volume)   # unit L2 norm
    values[idx] = amplitude
    return GridFunction(grid, FREQUENCY, values)


def random_band_limited(grid: Grid, rng: np.random.Generator, band: int = 4,
                        normalize: bool = True) -> GridFunction:
    """Random spectrum supported on modes with all |k_j| <= band."""
    if band < 1 or band > grid.n // 2 - 1:
        raise ConfigurationError(f"band {band} outside grid range")
    values = np.zeros(grid.shape, dtype=complex)
    axes = [np.fft.fftfreq(grid.n, d=1.0 / grid.n).reshape(
        [grid.n if j == i else 1 for i in range(grid.dim)])
        for j in range(grid.dim)]
    mask = np.ones(grid.shape, dtype=bool)
    for ax in axes:
        mask &= np.broadcast_to(np.abs(ax) <= band, grid.shape)
    count = int(np.sum(mask))
    values[mask] = rng.standard_normal(count) + 1j * rng.standard_normal(count)
    f = GridFunction(grid, FREQUENCY, values)
    if normalize:
        nrm = norm(f)
        f = GridFunction(grid, FREQUENCY, values / nrm)
    return f


def indicator(grid: Grid, lo: float = 0.0, hi: float = 1.0) -> GridFunction:
    """Indicator of the box (lo, hi)^d sampled at grid points (a rough vector)."""
    x = grid.points_axis()
    axis_mask = (x > lo) & (x < hi)
    values = np.ones(grid.shape)
    for j in range(grid.dim):
        shape = [1] * grid.dim
        shape[j] = grid.n
        values = values * axis_mask.reshape(shape)
    return GridFunction(grid, PHYSICAL, values.astype(complex))


def gaussian_bump(grid: Grid, center: float = None, width: float = None) -> GridFunction:
    """Smooth bump exp(-|x - c|^2 / (2 w^2)), well localized inside the box."""
    if center is None:
        center = grid.box / 2.0
    if width is None:
        width = grid.box / 16.0
    x = grid.points_axis()
    axis_vals = np.exp(-((x - center) ** 2) / (2.0 * width**2))
    values = np.ones(grid.shape)
    for j in range(grid.dim):
        shape = [1] * grid.dim
        shape[j] = grid.n
        values = values * axis_vals.reshape(shape)
    return GridFunction(grid, PHYSICAL, values.astype(complex))


def refine(f: GridFunction, factor: int = 2) -> GridFunction:
    """Trigonometric interpolation onto a grid with factor x points per axis."""
    if factor < 1 or factor & (factor - 1):
        raise ConfigurationError("refinement factor must be a power of two")
    if factor == 1:
        return f
    g = f.grid
    fine = Grid(g.dim, g.n * factor, g.box)
    src = np.fft.fftshift(f.to_frequency().values)
    pad = (fine.n - g.n) // 2
    padded = np.pad(src, [(pad, pad)] * g.dim)
    # ortho normalization scales by sqrt(points ratio) to preserve values
    scale = factor ** (g.dim / 2.0)
    values = np.fft.ifftshift(padded) * scale
    return GridFunction(fine, FREQUENCY, values)


# -- serialization -----------------------------------------------------------

def save_function(f: GridFunction, stem) -> tuple[Path, Path]:
    """Write `<stem>.f64` (little-endian f64 interleaved re/im, C order)
    and sidecar `<stem>.json` with {dim, n, box, representation}."""
    stem = Path(stem)
    data_path = stem.with_suffix(".f64")
    meta_path = stem.with_suffix(".json")
    flat = np.empty(f.values.size * 2)
    flat[0::2] = f.values.real.reshape(-1)
    flat[1::2] = f.values.imag.reshape(-1)
    flat.astype("<f8").tofile(data_path)
    meta = {"dim": f.grid.dim, "n": f.grid.n, "box": f.grid.box,
            "representation": f.representation}
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return data_path, meta_path


def load_function(stem) -> GridFunction:
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    grid = Grid(meta["dim"], meta["n"], meta["box"])
    flat = np.fromfile(stem.with_suffix(".f64"), dtype="<f8")
    if flat.size != 2 * grid.n**grid.dim:
        raise ConfigurationError("binary payload size does not match sidecar")
    values = (flat[0::2] + 1j * flat[1::2]).reshape(grid.shape)
    return GridFunction(grid, meta["representation"], values)


def export_slice_csv(f: GridFunction, path, axis: int = 0, index: int = 0):
    """CSV of a 1-d physical slice: columns x, re, im."""
    phys = f.to_physical()
    sl = [index] * f.grid.dim
    sl[axis] = slice(None)
    line = phys.values[tuple(sl)]
    x = f.grid.points_axis()
    with open(path, "w") as fh:
        fh.write("x,re,im\n")
        for xj, vj in zip(x, line):
            fh.write(f"{xj:.17g},{vj.real:.17g},{vj.imag:.17g}\n")


def xminus1_model_ratio(spec, grid: Grid, vectors) -> dict:
    """Cross-check of the two X_{-1} models on test vectors.

    Ratio of the extrapolated norm (gauge 1/|a(0,.)|) to the negative
    Sobolev norm of order -m; bounded above and below by the symbol's
    ellipticity, so the measured spread certifies model consistency.
    """
    extra = extrapolated_norm(spec, 0.0)
    sob = negative_sobolev(-float(spec.order))
    ratios = []
    for f in vectors:
        ns = norm(f, sob)
        if ns == 0.0:
            continue
        ratios.append(norm(f, extra) / ns)
    if not ratios:
        raise ConfigurationError("no nonzero test vectors supplied")
    return {"min_ratio": float(min(ratios)), "max_ratio": float(max(ratios)),
            "vectors": len(ratios)}

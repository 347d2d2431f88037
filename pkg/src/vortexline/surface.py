"""Flat-torus geometry and pseudo-spectral calculus.

Everything downstream lives on a flat torus C / Lambda with lattice
Lambda = lam * (Z + Z * tau), Im(tau) > 0, carrying the euclidean metric
dx^2 + dy^2, area form omega = dx ^ dy and total area A = lam^2 * Im(tau).
Fields are sampled on the uniform N1 x N2 grid of lattice fractions
z_ij = lam * (i/N1 + (j/N2) * tau), which makes constant-coefficient
elliptic operators diagonal in the discrete Fourier basis.

Sign and orientation table (fixed here, used everywhere downstream):

    coordinates     z = x + i y, orientation dx ^ dy > 0
    Hodge star      *dx = dy, *dy = -dx  (so ** = -1 on one-forms)
    Laplacian       Delta = d_xx + d_yy  (negative spectrum)
    codifferential  d*(p dx + q dy) = -(d_x p + d_y q)
    integration     integral(f) = mean(samples) * A

The Fourier mode indexed (m, n) is exp(2 pi i (m s + n t)) in lattice
fractions (s, t); its euclidean wavevector is

    k_x = 2 pi m / lam,
    k_y = 2 pi (n - m Re(tau)) / (lam Im(tau)),

so oblique lattices are differentiated exactly.  First-derivative
multipliers are zeroed on Nyquist rows and columns to keep derivatives of
real fields real; the Laplacian multiplier -|k|^2 needs no such fix.

The Green's function G(., z0) with Delta G = delta_{z0} - 1/A is evaluated
in closed form through the odd Jacobi theta function,

    G = (1/2pi) log|theta1((z - z0)/lam | tau)| - Im((z - z0)/lam)^2 / (2 Im tau) + C,

where C fixes the grid mean of G to zero.  Each summand transforms under
lattice translations but their sum is periodic, so arguments are reduced
to the centered fundamental cell before evaluation.  Near the source
G = (1/2pi) log|z - z0| + regular, and the regular part at the source is
known in closed form; the vortex module's core regularizations rely on
both facts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from types import SimpleNamespace

import numpy as np

__all__ = [
    "TorusGeometry",
    "GridField",
    "PointOnTorus",
    "make_torus",
    "torus_point",
    "constant_field",
    "field_from_function",
    "grid_mesh",
    "lattice_mesh",
    "integrate",
    "spectral_gradient",
    "laplacian_apply",
    "divergence",
    "poisson_solve",
    "greens_function",
    "greens_value",
    "greens_regular_center",
    "save_field_csv",
    "load_field_csv",
]

_TWO_PI = 2.0 * math.pi
# Lattice-fraction tolerance under which two points count as the same point.
_COINCIDENCE_TOL = 1e-9


@dataclass(frozen=True)
class TorusGeometry:
    """Flat torus C / lam(Z + Z tau) with a fixed sampling grid.

    period_ratio is tau (Im tau > 0), scale is lam > 0, grid_dims = (N1, N2)
    are the sample counts along the lam and lam*tau directions.
    """

    period_ratio: complex
    scale: float
    grid_dims: tuple[int, int]

    @property
    def area(self) -> float:
        return self.scale * self.scale * self.period_ratio.imag

    def lattice_to_z(self, s, t):
        """Map lattice fractions (s, t) to the complex plane point lam(s + t tau)."""
        return self.scale * (s + t * self.period_ratio)

    @property
    def cell_steps(self) -> tuple[float, float]:
        """Euclidean lengths of the two grid steps."""
        n1, n2 = self.grid_dims
        return (self.scale / n1, self.scale * abs(self.period_ratio) / n2)


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples of a function on the grid of a TorusGeometry.

    values has shape grid_dims and is held read-only.  singular_nodes lists
    grid nodes where a logarithmically singular function was replaced by
    its regular part; consumers that care must treat those nodes specially,
    everything else may ignore the flag.
    """

    geometry: TorusGeometry
    values: np.ndarray
    singular_nodes: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != self.geometry.grid_dims:
            raise ValueError(
                f"field shape {vals.shape} does not match grid {self.geometry.grid_dims}"
            )
        if np.iscomplexobj(vals):
            vals = np.ascontiguousarray(vals, dtype=np.complex128)
        else:
            vals = np.ascontiguousarray(vals, dtype=np.float64)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class PointOnTorus:
    """A point with canonical lattice fractions s, t in [0, 1) and z = lam(s + t tau)."""

    s: float
    t: float
    z: complex


def make_torus(period_ratio, area, grid_dims=(128, 128)) -> TorusGeometry:
    """Build the torus with given shape tau, total area and grid resolution."""
    tau = complex(period_ratio)
    if not tau.imag > 0.0:
        raise ValueError(f"period ratio must have positive imaginary part, got {tau}")
    area = float(area)
    if not area > 0.0:
        raise ValueError(f"area must be positive, got {area}")
    n1, n2 = int(grid_dims[0]), int(grid_dims[1])
    if n1 < 16 or n2 < 16:
        raise ValueError(f"grid dimensions must be at least 16, got {grid_dims}")
    scale = math.sqrt(area / tau.imag)
    return TorusGeometry(period_ratio=tau, scale=scale, grid_dims=(n1, n2))


def _reduce_unit(x: float) -> float:
    """Reduce to [0, 1), snapping values within 1e-12 of an integer to 0."""
    f = x - math.floor(x)
    if f >= 1.0 - 1e-12 or f <= 1e-12:
        return 0.0
    return f


def torus_point(geom: TorusGeometry, z=None, lattice=None) -> PointOnTorus:
    """Canonical torus point from a complex coordinate or lattice fractions."""
    if (z is None) == (lattice is None):
        raise ValueError("give exactly one of z or lattice")
    if lattice is not None:
        s, t = float(lattice[0]), float(lattice[1])
    else:
        z = complex(z)
        t = z.imag / (geom.scale * geom.period_ratio.imag)
        s = z.real / geom.scale - t * geom.period_ratio.real
    s, t = _reduce_unit(s), _reduce_unit(t)
    return PointOnTorus(s=s, t=t, z=complex(geom.lattice_to_z(s, t)))


def lattice_mesh(geom: TorusGeometry):
    """Meshes S, T of lattice fractions of the grid nodes, shape grid_dims."""
    n1, n2 = geom.grid_dims
    s = np.arange(n1) / n1
    t = np.arange(n2) / n2
    return np.meshgrid(s, t, indexing="ij")


def grid_mesh(geom: TorusGeometry):
    """Meshes X, Y of euclidean coordinates of the grid nodes."""
    S, T = lattice_mesh(geom)
    Z = geom.lattice_to_z(S, T)
    return Z.real, Z.imag


def constant_field(geom: TorusGeometry, value) -> GridField:
    return GridField(geom, np.full(geom.grid_dims, value))


def field_from_function(geom: TorusGeometry, fn) -> GridField:
    """Sample fn(x, y) on the grid."""
    X, Y = grid_mesh(geom)
    return GridField(geom, fn(X, Y))


@lru_cache(maxsize=32)
def _spectral(geom: TorusGeometry) -> SimpleNamespace:
    """Wavevector multipliers for the grid, in full-fft2 and rfft2 layouts."""
    n1, n2 = geom.grid_dims
    tau = geom.period_ratio
    lam = geom.scale
    m_full = np.fft.fftfreq(n1, d=1.0 / n1)
    n_half = np.arange(n2 // 2 + 1, dtype=np.float64)
    n_full = np.fft.fftfreq(n2, d=1.0 / n2)

    def wavevectors(m, n):
        M, N = np.meshgrid(m, n, indexing="ij")
        kx = _TWO_PI * M / lam
        ky = _TWO_PI * (N - M * tau.real) / (lam * tau.imag)
        return kx, ky, M, N

    out = SimpleNamespace()
    for tag, n_ax in (("half", n_half), ("full", n_full)):
        kx, ky, M, N = wavevectors(m_full, n_ax)
        k2 = kx * kx + ky * ky
        inv_k2 = np.zeros_like(k2)
        nz = k2 > 0.0
        inv_k2[nz] = 1.0 / k2[nz]
        # Nyquist modes are their own conjugate partner: first derivatives
        # of real fields stay real only if those multipliers vanish.
        dx = 1j * kx.astype(np.complex128)
        dy = 1j * ky.astype(np.complex128)
        if n1 % 2 == 0:
            dx[M == -(n1 // 2)] = 0.0
            dy[M == -(n1 // 2)] = 0.0
        if n2 % 2 == 0:
            nyq = (N == n2 // 2) | (N == -(n2 // 2))
            dx[nyq] = 0.0
            dy[nyq] = 0.0
        setattr(out, tag, SimpleNamespace(k2=k2, inv_k2=inv_k2, dx=dx, dy=dy))
    return out


def _apply_multiplier(geom: TorusGeometry, values: np.ndarray, which: str):
    """Apply a diagonal Fourier multiplier; real input takes the rfft path."""
    sp = _spectral(geom)
    if np.iscomplexobj(values):
        mult = getattr(sp.full, which)
        return np.fft.ifft2(np.fft.fft2(values) * mult)
    mult = getattr(sp.half, which)
    return np.fft.irfft2(np.fft.rfft2(values) * mult, s=geom.grid_dims)


def integrate(f: GridField):
    """Integral over the torus: sample mean times total area.

    Exact for trigonometric polynomials resolved by the grid, spectrally
    accurate for smooth fields.
    """
    return f.values.mean() * f.geometry.area


def spectral_gradient(f: GridField) -> tuple[GridField, GridField]:
    """(d_x f, d_y f) by Fourier differentiation, Nyquist modes dropped."""
    geom = f.geometry
    return (
        GridField(geom, _apply_multiplier(geom, f.values, "dx")),
        GridField(geom, _apply_multiplier(geom, f.values, "dy")),
    )


def _laplacian_arr(geom: TorusGeometry, values: np.ndarray):
    sp = _spectral(geom)
    if np.iscomplexobj(values):
        return np.fft.ifft2(np.fft.fft2(values) * (-sp.full.k2))
    return np.fft.irfft2(np.fft.rfft2(values) * (-sp.half.k2), s=geom.grid_dims)


def laplacian_apply(f: GridField) -> GridField:
    """Delta f = d_xx f + d_yy f by Fourier multiplication with -|k|^2."""
    return GridField(f.geometry, _laplacian_arr(f.geometry, f.values))


def divergence(geom: TorusGeometry, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """d_x px + d_y py for the component arrays of a one-form p dx + q dy.

    The codifferential in the sign table is the negative of this.
    """
    return _apply_multiplier(geom, px, "dx") + _apply_multiplier(geom, py, "dy")


def poisson_solve(f: GridField, mean_tol: float = 1e-10) -> GridField:
    """Solve Delta s = f with mean(s) = 0; f must have (near-)zero mean.

    The sampled mean is subtracted before inversion.  If it exceeds
    mean_tol relative to the sup norm of f the problem is inconsistent and
    a ValueError is raised.
    """
    geom = f.geometry
    vals = f.values
    mean = vals.mean()
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    if scale > 0.0 and abs(mean) > mean_tol * scale:
        raise ValueError(
            f"right-hand side has mean {mean:.3e} relative to sup {scale:.3e}; "
            "a periodic Poisson problem needs zero mean"
        )
    sp = _spectral(geom)
    if np.iscomplexobj(vals):
        hat = np.fft.fft2(vals - mean)
        out = np.fft.ifft2(hat * (-sp.full.inv_k2))
    else:
        hat = np.fft.rfft2(vals - mean)
        out = np.fft.irfft2(hat * (-sp.half.inv_k2), s=geom.grid_dims)
    return GridField(geom, out)


# ---------------------------------------------------------------------------
# Jacobi theta machinery for the lattice Green's function.


def _theta_term_count(im_tau: float) -> int:
    """Terms needed so dropped theta-series terms are below 1e-18 relatively.

    Term n of theta1 decays like exp(-pi Im(tau) (|n + 1/2| - 1/2)^2 - ...)
    once the argument is reduced to |Im w| <= Im(tau)/2; solving
    pi Im(tau) M (M - 1) >= 42 bounds the tail.
    """
    m = 0.5 + math.sqrt(0.25 + 42.0 / (math.pi * im_tau))
    return int(math.ceil(m)) + 2


def _theta1_logabs_and_ratio(tau: complex, w: np.ndarray):
    """log|theta1(w | tau)| and theta1'/theta1 (w), vectorized.

    theta1(w) = -i sum_n (-1)^n exp(i pi tau (n + 1/2)^2 + (2n + 1) i pi w).
    Each term is assembled inside one exp so nothing overflows for reduced
    arguments.  At lattice points theta1 vanishes: callers mask those nodes
    (log -> -inf, ratio -> inf under errstate suppression).
    """
    w = np.asarray(w, dtype=np.complex128)
    M = _theta_term_count(tau.imag)
    theta = np.zeros_like(w)
    dtheta = np.zeros_like(w)
    for n in range(-M, M):
        sign = -1.0 if n % 2 else 1.0
        coeff = 1j * math.pi * tau * (n + 0.5) ** 2
        term = sign * np.exp(coeff + (2 * n + 1) * 1j * math.pi * w)
        theta += term
        dtheta += (2 * n + 1) * 1j * math.pi * term
    theta *= -1j
    dtheta *= -1j
    with np.errstate(divide="ignore", invalid="ignore"):
        logabs = np.log(np.abs(theta))
        ratio = dtheta / theta
    return logabs, ratio


def _theta1_prime_zero(tau: complex) -> float:
    """|theta1'(0 | tau)|."""
    M = _theta_term_count(tau.imag)
    total = 0.0 + 0.0j
    for n in range(-M, M):
        sign = -1.0 if n % 2 else 1.0
        total += sign * (2 * n + 1) * 1j * math.pi * np.exp(1j * math.pi * tau * (n + 0.5) ** 2)
    return abs(-1j * total)


def _reduce_half(arr):
    """Reduce lattice fractions to the centered cell [-1/2, 1/2)."""
    return arr - np.round(arr)


@lru_cache(maxsize=64)
def _greens_bundle(geom: TorusGeometry, z0: PointOnTorus) -> SimpleNamespace:
    """Grid evaluation of G(., z0) and its z-derivative, plus normalization data.

    Returns values (regular part substituted at a coinciding node), the
    additive constant norm_c that makes the grid mean zero, the normalized
    regular value at the source, d/dz of G with the singular node zeroed,
    and the singular node index or None.
    """
    tau = geom.period_ratio
    lam = geom.scale
    S, T = lattice_mesh(geom)
    s_rel = _reduce_half(S - z0.s)
    t_rel = _reduce_half(T - z0.t)
    sing = (np.abs(s_rel) < _COINCIDENCE_TOL) & (np.abs(t_rel) < _COINCIDENCE_TOL)
    w = s_rel + t_rel * tau
    logabs, ratio = _theta1_logabs_and_ratio(tau, w)
    raw = logabs / _TWO_PI - 0.5 * t_rel * t_rel * tau.imag
    # Regular part of G at the source: strip (1/2pi) log|z - z0| = (1/2pi) log(lam |w|).
    reg_raw = math.log(_theta1_prime_zero(tau) / lam) / _TWO_PI
    raw = np.where(sing, reg_raw, raw)
    norm_c = -float(raw.mean())
    values = raw + norm_c
    values.setflags(write=False)
    # d/dz G = (1/(4 pi lam)) theta1'/theta1 + i Im(w) / (2 lam Im tau),
    # with Im(w) = t_rel Im(tau).
    dz = ratio / (4.0 * math.pi * lam) + 1j * t_rel / (2.0 * lam)
    dz = np.where(sing, 0.0, dz)
    dz = np.ascontiguousarray(dz, dtype=np.complex128)
    dz.setflags(write=False)
    idx = np.argwhere(sing)
    singular_node = (int(idx[0][0]), int(idx[0][1])) if len(idx) else None
    return SimpleNamespace(
        values=values,
        norm_c=norm_c,
        regular_center=reg_raw + norm_c,
        dz=dz,
        singular_node=singular_node,
    )


def greens_function(geom: TorusGeometry, z0: PointOnTorus) -> GridField:
    """G(., z0) with Delta G = delta_{z0} - 1/area and zero grid mean.

    If z0 sits on a grid node that node holds the regular part of G (the
    value after removing (1/2pi) log|z - z0|) and is flagged singular.

    The additive constant is fixed per source by the grid mean.  For
    on-grid sources the sampled kernel set is a translate of itself, so
    the constant is source-independent and node-pair symmetry
    G(x, y) = G(y, x) is exact; for off-grid sources the constant drifts
    at quadrature order, so compare only constant-free differences across
    different sources.
    """
    b = _greens_bundle(geom, z0)
    nodes = (b.singular_node,) if b.singular_node is not None else ()
    return GridField(geom, b.values, singular_nodes=nodes)


def greens_regular_center(geom: TorusGeometry, z0: PointOnTorus) -> float:
    """Regular part of G(., z0) at z0 itself, in the zero-grid-mean normalization."""
    return _greens_bundle(geom, z0).regular_center


def greens_value(geom: TorusGeometry, z0: PointOnTorus, z) -> float:
    """G(z, z0) at an arbitrary point z, in the zero-grid-mean normalization.

    z must not coincide with z0 (use greens_regular_center for the regular
    part there).
    """
    b = _greens_bundle(geom, z0)
    p = torus_point(geom, z=z)
    s_rel = float(_reduce_half(np.asarray(p.s - z0.s)))
    t_rel = float(_reduce_half(np.asarray(p.t - z0.t)))
    if abs(s_rel) < _COINCIDENCE_TOL and abs(t_rel) < _COINCIDENCE_TOL:
        raise ValueError("evaluation point coincides with the source")
    tau = geom.period_ratio
    logabs, _ = _theta1_logabs_and_ratio(tau, np.asarray(s_rel + t_rel * tau))
    raw = float(logabs) / _TWO_PI - 0.5 * t_rel * t_rel * tau.imag
    return raw + b.norm_c


# ---------------------------------------------------------------------------
# Plain-text serialization of real fields.

_CSV_MAGIC = "# vortexline-field 1"


def save_field_csv(f: GridField, path) -> None:
    """Write a real field as commented-header CSV, one grid row per line."""
    if np.iscomplexobj(f.values):
        raise ValueError("CSV serialization handles real fields only")
    g = f.geometry
    lines = [
        _CSV_MAGIC,
        f"# grid {g.grid_dims[0]} {g.grid_dims[1]}",
        f"# period_ratio {g.period_ratio.real!r} {g.period_ratio.imag!r}",
        f"# scale {g.scale!r}",
        "# layout row-major: line i spans the second lattice direction",
    ]
    for row in f.values:
        lines.append(",".join(repr(float(x)) for x in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field_csv(path) -> GridField:
    """Read a field written by save_field_csv, rebuilding its geometry."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != _CSV_MAGIC:
        raise ValueError(f"{path} is not a vortexline field file")
    header = {}
    body = []
    for ln in lines[1:]:
        if ln.startswith("#"):
            parts = ln[1:].split()
            if parts and parts[0] in ("grid", "period_ratio", "scale"):
                header[parts[0]] = parts[1:]
        elif ln.strip():
            body.append([float(tok) for tok in ln.split(",")])
    n1, n2 = (int(tok) for tok in header["grid"])
    tau = complex(float(header["period_ratio"][0]), float(header["period_ratio"][1]))
    scale = float(header["scale"][0])
    geom = TorusGeometry(period_ratio=tau, scale=scale, grid_dims=(n1, n2))
    vals = np.array(body, dtype=np.float64)
    if vals.shape != (n1, n2):
        raise ValueError(f"{path}: expected {n1}x{n2} samples, got {vals.shape}")
    return GridField(geom, vals)

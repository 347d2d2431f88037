"""The L2 Kahler form on vortex moduli space, from its gauge-theoretic definition.

A tangent direction to the moduli space at a solution (A, psi) is a pair
(a, phi): an infinitesimal connection change and Higgs change solving the
linearized vortex equations, fixed up to gauge by the Coulomb condition

    d*(ia) + Im<psi, phi> = 0,

which makes (a, phi) L2-orthogonal to the gauge orbit.  On such pairs the
Kahler form is

    sigma((a1,phi1),(a2,phi2)) = int ia1 ^ ia2 + int Im<phi1,phi2> omega.

Everything here is phrased in gauge-invariant scalars so no phase of psi
is ever sampled:

  * the real one-form alpha := ia is stored by components;
  * phi is stored against the frame {psi, D} with D the (1,0)-part of
    d_A psi, i.e. phi = A psi + B D with A a complex field and B a complex
    constant.  Holomorphicity of psi gives the frame's Gram data in terms
    of u = log|psi|^2 alone:

        <psi,psi> = e^u,  <psi,D> = d/dz e^u =: p,  <D,D> = e^u |d/dz u|^2 =: k,

    and p, k are exactly the regularized fields the vortex module carries
    through the cores.

Two constructions produce tangent directions:

  * translation_lift: for a translation direction w the covariant
    translate (iota_w iF_A, D_w psi) solves the linearized equations
    because translations are symmetries; a Coulomb corrector chi (a
    Green's-operator solve) removes the residual gauge component, which on
    the grid is already at discretization level.
  * gauge_direction: the vertical orbit direction of a real function f,
    packaged in the same container so pairings against it can be tested.

For degree r > 1 the form in individual vortex motions comes from the
core expansion route (samols_coefficients / samols_form): around a simple
zero z_j,

    u = 2 log|z - z_j| + a_j + (1/2)(conj(b_j) dz + b_j conj(dz)) + O(2),

and the moduli Kahler form is a fixed combination of the position
derivatives of the b_j.  The overall normalization is not hardcoded: it
is calibrated once against the direct sigma computation at r = 1 (a
derived constant, cached per process) and reused for all degrees.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from ._elliptic import shifted_laplacian_solve
from .surface import (
    GridField,
    PointOnTorus,
    TorusGeometry,
    _reduce_half,
    divergence,
    lattice_mesh,
    make_torus,
    spectral_gradient,
    torus_point,
)
from .vortex import (
    TaubesSolution,
    VortexParams,
    _derived,
    divisor,
    solve_taubes,
    vortex_params,
)

__all__ = [
    "HorizontalLift",
    "KahlerMatrix",
    "SamolsData",
    "ModuliStencil",
    "ExtractionError",
    "green_psi",
    "connection_one_form",
    "translation_lift",
    "gauge_direction",
    "rotate_lift",
    "evaluate_sigma",
    "samols_coefficients",
    "moduli_stencil",
    "samols_form",
    "samols_normalization",
    "one_vortex_volume",
    "dh_slope",
    "worker_count",
]


class ExtractionError(RuntimeError):
    """Core-expansion extraction failed (vortices too close or fit degenerate)."""


def worker_count() -> int:
    """Worker threads for independent solves, from VORTEXLINE_THREADS (default 1)."""
    raw = os.environ.get("VORTEXLINE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"VORTEXLINE_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


@dataclass(eq=False)
class HorizontalLift:
    """A tangent direction (alpha, phi) over a vortex solution.

    a_form holds the components of the real one-form alpha = ia.  The Higgs
    part is phi = psi_coeff * psi + deriv_coeff * D in the gauge-invariant
    frame of the module docstring; together with the base solution's
    (e^u, p, k) data this is enough to evaluate Im<phi1, phi2> for any two
    lifts.  chi is the Coulomb corrector that was subtracted off, and
    coulomb_residual the recomputed sup of d*(alpha) + Im<psi, phi>.
    """

    base: TaubesSolution
    direction: complex | str
    a_form: tuple[GridField, GridField]
    psi_coeff: GridField
    deriv_coeff: complex
    chi: GridField
    coulomb_residual: float


def green_psi(sol: TaubesSolution, f: GridField, rtol: float = 1e-10) -> GridField:
    """Apply the Green's operator of -Delta + |psi|^2 to a real field."""
    vals = f.values
    if np.iscomplexobj(vals):
        raise ValueError("green_psi expects a real field")
    d = _derived(sol)
    out, _, _ = shifted_laplacian_solve(sol.params.geometry, d.eu, vals, rtol=rtol)
    return GridField(sol.params.geometry, out)


def connection_one_form(
    sol: TaubesSolution,
    a_form: tuple[GridField, GridField],
    psi_coeff=None,
    deriv_coeff: complex = 0.0,
    rtol: float = 1e-10,
) -> GridField:
    """Gauge component gamma of a raw tangent direction.

    gamma = G_psi(d*(alpha) + Im<psi, phi>); subtracting the gauge direction
    of gamma from (alpha, phi) enforces the Coulomb condition.  On the orbit
    direction of a real function f (alpha = grad f, phi = i f psi) the
    output is f itself, which is the identity tests pin down.
    """
    geom = sol.params.geometry
    d = _derived(sol)
    rho = -divergence(geom, a_form[0].values, a_form[1].values)
    pair = np.zeros(geom.grid_dims, dtype=np.complex128)
    if psi_coeff is not None:
        pair = pair + psi_coeff.values * d.eu
    if deriv_coeff != 0.0:
        pair = pair + complex(deriv_coeff) * d.p
    out, _, _ = shifted_laplacian_solve(geom, d.eu, rho + pair.imag, rtol=rtol)
    return GridField(geom, out)


def gauge_direction(sol: TaubesSolution, f: GridField) -> HorizontalLift:
    """The vertical (gauge-orbit) direction of a real function f.

    alpha = grad f and phi = i f psi.  Packaged as a lift so sigma and the
    connection form can be evaluated against it; it is of course not
    horizontal.
    """
    geom = sol.params.geometry
    gx, gy = spectral_gradient(f)
    coeff = GridField(geom, 1j * f.values.astype(np.complex128))
    zero = GridField(geom, np.zeros(geom.grid_dims))
    return HorizontalLift(
        base=sol,
        direction="gauge",
        a_form=(gx, gy),
        psi_coeff=coeff,
        deriv_coeff=0.0,
        chi=zero,
        coulomb_residual=float("nan"),
    )


def _coulomb_residual(sol, ax, ay, a_coeff, b_coeff) -> float:
    d = _derived(sol)
    geom = sol.params.geometry
    rho = -divergence(geom, ax, ay)
    pair = a_coeff * d.eu + b_coeff * d.p
    return float(np.max(np.abs(rho + np.imag(pair))))


def translation_lift(
    sol: TaubesSolution,
    w: complex,
    lift_tol: float = 1e-8,
    rtol: float = 1e-10,
) -> HorizontalLift:
    """Coulomb-gauge lift of the translation direction w.

    Raw ansatz: alpha = iota_w(iF_A) with iF_A = (tau - e^u/2) omega, and
    phi = D_w psi = w D (using holomorphicity).  The corrector
    chi = G_psi(d* alpha + Im<psi, phi>) is then removed; analytically the
    raw pair is already Coulomb, so chi only sweeps up discretization
    residue.  Raises if the recomputed Coulomb residual exceeds lift_tol.
    """
    w = complex(w)
    geom = sol.params.geometry
    d = _derived(sol)
    f = sol.params.tau - 0.5 * d.eu
    ax_raw = -f * w.imag
    ay_raw = f * w.real
    rho = -divergence(geom, ax_raw, ay_raw) + np.imag(w * d.p)
    chi, _, _ = shifted_laplacian_solve(geom, d.eu, rho, rtol=rtol)
    cx, cy = spectral_gradient(GridField(geom, chi))
    ax = ax_raw - cx.values
    ay = ay_raw - cy.values
    a_coeff = -1j * chi
    residual = _coulomb_residual(sol, ax, ay, a_coeff, w)
    scale = max(1.0, 2.0 * sol.params.tau)
    if residual > lift_tol * scale:
        raise ExtractionError(
            f"Coulomb residual {residual:.3e} exceeds tolerance after projection"
        )
    return HorizontalLift(
        base=sol,
        direction=w,
        a_form=(GridField(geom, ax), GridField(geom, ay)),
        psi_coeff=GridField(geom, a_coeff),
        deriv_coeff=w,
        chi=GridField(geom, chi),
        coulomb_residual=residual,
    )


def rotate_lift(l: HorizontalLift) -> HorizontalLift:
    """Apply the complex structure J: alpha -> *alpha, phi -> i phi."""
    geom = l.base.params.geometry
    ax, ay = l.a_form
    return HorizontalLift(
        base=l.base,
        direction=(1j * l.direction) if isinstance(l.direction, complex) else l.direction,
        a_form=(GridField(geom, -ay.values), GridField(geom, ax.values)),
        psi_coeff=GridField(geom, 1j * l.psi_coeff.values),
        deriv_coeff=1j * l.deriv_coeff,
        chi=l.chi,
        coulomb_residual=l.coulomb_residual,
    )


def evaluate_sigma(l1: HorizontalLift, l2: HorizontalLift) -> float:
    """sigma(l1, l2) = int alpha1 ^ alpha2 + int Im<phi1, phi2> omega.

    The Higgs pairing expands over the {psi, D} frame:
    <phi1,phi2> = conj(A1) A2 e^u + conj(A1) B2 p + conj(B1) A2 conj(p)
    + conj(B1) B2 k, all regularized fields of the base solution.
    """
    if l1.base.params != l2.base.params:
        raise ValueError("lifts live over different solutions")
    sol = l1.base
    geom = sol.params.geometry
    d = _derived(sol)
    a1x, a1y = l1.a_form[0].values, l1.a_form[1].values
    a2x, a2y = l2.a_form[0].values, l2.a_form[1].values
    wedge = a1x * a2y - a1y * a2x
    A1, A2 = l1.psi_coeff.values, l2.psi_coeff.values
    B1, B2 = l1.deriv_coeff, l2.deriv_coeff
    pair = (
        np.conjugate(A1) * A2 * d.eu
        + np.conjugate(A1) * B2 * d.p
        + np.conjugate(B1) * A2 * np.conjugate(d.p)
        + np.conjugate(B1) * B2 * d.k
    )
    total = wedge + np.imag(pair)
    return float(total.mean()) * geom.area


# ---------------------------------------------------------------------------
# Core-expansion route for r > 1.


@dataclass(frozen=True)
class SamolsData:
    """Local expansion data of u around each simple zero.

    b[j] is the complex coefficient of the linear term at vortex j and
    a[j] the regular constant.  db[r][s] = d b_s / d z_r (holomorphic
    position derivative) when extracted over a stencil, else None.
    fit_residual is the worst rms misfit of the annulus fits.
    """

    points: tuple[PointOnTorus, ...]
    b: tuple[complex, ...]
    a: tuple[float, ...]
    fit_residual: float
    annulus: tuple[float, float]
    db: tuple[tuple[complex, ...], ...] | None = None

    def to_json_dict(self) -> dict:
        out = {
            "points": [[p.s, p.t] for p in self.points],
            "b": [[z.real, z.imag] for z in self.b],
            "a": list(self.a),
            "fit_residual": self.fit_residual,
            "annulus": list(self.annulus),
        }
        if self.db is not None:
            out["db"] = [[[z.real, z.imag] for z in row] for row in self.db]
        return out


def _min_separation(geom: TorusGeometry, points) -> float:
    """Smallest toroidal distance between distinct cores, or between images.

    Includes the shortest nonzero lattice vector so a single vortex sees
    its own periodic images.
    """
    tau = geom.period_ratio
    lam = geom.scale
    best = min(
        abs(m + n * tau) * lam
        for m in range(-2, 3)
        for n in range(-2, 3)
        if (m, n) != (0, 0)
    )
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            ds = float(_reduce_half(np.asarray(points[i].s - points[j].s)))
            dt = float(_reduce_half(np.asarray(points[i].t - points[j].t)))
            best = min(best, abs(lam * (ds + dt * tau)))
    return best


def _fit_core(geom, u_vals, point, inner, outer):
    """Least-squares expansion of u - 2 log|z - z_j| on an annulus.

    Returns (a_j, b_j, rms).  Basis: 1, Re d, Im d, Re d^2, Im d^2, |d|^2
    with d = (z - z_j)/outer for conditioning.
    """
    S, T = lattice_mesh(geom)
    ds = _reduce_half(S - point.s)
    dt = _reduce_half(T - point.t)
    delta = geom.scale * (ds + dt * geom.period_ratio)
    rad = np.abs(delta)
    mask = (rad >= inner) & (rad <= outer)
    n_pts = int(mask.sum())
    if n_pts < 12:
        raise ExtractionError(
            f"only {n_pts} annulus nodes between radii {inner:.3g} and {outer:.3g}"
        )
    d = delta[mask] / outer
    target = u_vals[mask] - 2.0 * np.log(rad[mask])
    basis = np.stack(
        [
            np.ones_like(d.real),
            d.real,
            d.imag,
            (d * d).real,
            (d * d).imag,
            (d * np.conjugate(d)).real,
        ],
        axis=1,
    )
    coef, _, rank, _ = np.linalg.lstsq(basis, target, rcond=None)
    if rank < basis.shape[1]:
        raise ExtractionError("degenerate annulus fit (rank-deficient basis)")
    rms = float(np.sqrt(np.mean((basis @ coef - target) ** 2)))
    # u = 2log|d| + a + Re(conj(b) d) + ...: Re b couples to Re d, Im b to Im d.
    b = (coef[1] + 1j * coef[2]) / outer
    return float(coef[0]), complex(b), rms


def samols_coefficients(sol: TaubesSolution) -> SamolsData:
    """Extract the linear core coefficients b_j of a simple-zero solution.

    Requires all multiplicities 1 and zeros separated by at least 4 grid
    cells.  The fit annulus is [2h, min(sep/3, 8h)] with h the coarser
    grid step; if that leaves too few nodes the outer radius is enlarged
    once before giving up.
    """
    params = sol.params
    geom = params.geometry
    div = params.divisor
    if any(m != 1 for m in div.multiplicities):
        raise ExtractionError("core expansion requires simple zeros")
    h = max(geom.cell_steps)
    sep = _min_separation(geom, div.points)
    if sep < 4.0 * h:
        raise ExtractionError(
            f"cores separated by {sep:.3g} < 4 grid cells ({4 * h:.3g})"
        )
    inner = 2.0 * h
    outer = min(sep / 3.0, 8.0 * h)
    u_vals = sol.u.values
    a_list, b_list = [], []
    worst = 0.0
    for p in div.points:
        try:
            a, b, rms = _fit_core(geom, u_vals, p, inner, outer)
        except ExtractionError:
            a, b, rms = _fit_core(geom, u_vals, p, inner, min(sep / 2.5, 12.0 * h))
        a_list.append(a)
        b_list.append(b)
        worst = max(worst, rms)
    return SamolsData(
        points=div.points,
        b=tuple(b_list),
        a=tuple(a_list),
        fit_residual=worst,
        annulus=(inner, outer),
    )


@dataclass(eq=False)
class ModuliStencil:
    """Base solution plus solutions at axis displacements of each vortex."""

    base: TaubesSolution
    step: float
    displaced: dict  # (vortex index, axis, sign) -> TaubesSolution


def moduli_stencil(
    sol: TaubesSolution,
    step_cells: float = 3.0,
    tol: float = 1e-10,
) -> ModuliStencil:
    """Solve the 4r displaced configurations for position derivatives.

    Each vortex is moved by +-step_cells grid steps along x and along y
    (off-grid positions are fine).  Solves are independent and run on
    worker_count() threads; assembly order is fixed.
    """
    params = sol.params
    geom = params.geometry
    div = params.divisor
    step = step_cells * max(geom.cell_steps)
    jobs = []
    for r_idx, p in enumerate(div.points):
        for axis, unit in (("x", 1.0), ("y", 1j)):
            for sign in (1.0, -1.0):
                pts = list(div.points)
                pts[r_idx] = torus_point(geom, z=p.z + sign * step * unit)
                d = divisor(geom, pts, div.multiplicities)
                if d.degree != div.degree or len(d.points) != len(div.points):
                    raise ExtractionError("stencil displacement merged two cores")
                jobs.append(((r_idx, axis, sign), vortex_params(geom, d, params.tau)))

    def solve_one(job):
        key, prm = job
        return key, solve_taubes(prm, tol=tol)

    workers = worker_count()
    displaced = {}
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for key, s in pool.map(solve_one, jobs):
                displaced[key] = s
    else:
        for job in jobs:
            key, s = solve_one(job)
            displaced[key] = s
    return ModuliStencil(base=sol, step=step, displaced=displaced)


_KAPPA: float | None = None


def samols_normalization(recompute: bool = False) -> float:
    """Overall constant of the core-expansion form, calibrated per process.

    The localization formula fixes the matrix up to one constant kappa.
    Rather than asserting it, the r = 1 case (where the direct
    gauge-theoretic sigma is available and position-independent) pins it:
    sigma(d_x, d_y) = kappa * 2 tau at r = 1.  Calibrated once at a fixed
    anchor configuration and cached for the process.
    """
    global _KAPPA
    if _KAPPA is None or recompute:
        geom = make_torus(1j, 1.0, (128, 128))
        tau = 8.0 * math.pi
        params = vortex_params(geom, divisor(geom, [0.0]), tau)
        sol = solve_taubes(params)
        lx = translation_lift(sol, 1.0)
        ly = translation_lift(sol, 1j)
        _KAPPA = evaluate_sigma(lx, ly) / (2.0 * tau)
    return _KAPPA


@dataclass(frozen=True)
class KahlerMatrix:
    """The moduli Kahler form on the real basis (x_1..x_r, y_1..y_r).

    entries is the real antisymmetric matrix of sigma values,
    metric_part the symmetric matrix sigma(., J.).  complex_coeff is the
    underlying hermitian r x r matrix M with
    sigma = (i/2) sum M_rs dz_r ^ dconj(z)_s.  hermitian_defect measures
    how far the raw position derivatives were from the exact-theory
    hermiticity (the numeric closedness check), relative to |M|.
    """

    dimension: int
    entries: np.ndarray
    metric_part: np.ndarray
    complex_coeff: np.ndarray
    hermitian_defect: float
    kappa: float
    min_metric_eigenvalue: float

    def to_json_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "entries": self.entries.tolist(),
            "metric_part": self.metric_part.tolist(),
            "complex_coeff_real": self.complex_coeff.real.tolist(),
            "complex_coeff_imag": self.complex_coeff.imag.tolist(),
            "hermitian_defect": self.hermitian_defect,
            "kappa": self.kappa,
            "min_metric_eigenvalue": self.min_metric_eigenvalue,
        }


def samols_form(stencil) -> KahlerMatrix:
    """Assemble the Kahler form from position derivatives of the b_j.

    Accepts a ModuliStencil or a base TaubesSolution (the stencil is then
    built with defaults).  B[r][s] = d b_s / d z_r by centered
    differences over the stencil; M = kappa (2 tau I + B + B^H).  In
    exact theory B is hermitian, so the symmetrization changes nothing
    and |B - B^H| is reported as the closedness diagnostic.
    """
    if not isinstance(stencil, ModuliStencil):
        stencil = moduli_stencil(stencil)
    base = stencil.base
    r = base.params.degree
    tau = base.params.tau
    d = stencil.step
    b_of = {key: samols_coefficients(s).b for key, s in stencil.displaced.items()}
    B = np.zeros((r, r), dtype=np.complex128)
    for r_idx in range(r):
        bxp = np.array(b_of[(r_idx, "x", 1.0)])
        bxm = np.array(b_of[(r_idx, "x", -1.0)])
        byp = np.array(b_of[(r_idx, "y", 1.0)])
        bym = np.array(b_of[(r_idx, "y", -1.0)])
        dbdx = (bxp - bxm) / (2.0 * d)
        dbdy = (byp - bym) / (2.0 * d)
        B[r_idx, :] = 0.5 * (dbdx - 1j * dbdy)
    kappa = samols_normalization()
    herm_defect = float(np.linalg.norm(B - B.conj().T))
    M = kappa * (2.0 * tau * np.eye(r) + B + B.conj().T)
    entries = np.zeros((2 * r, 2 * r))
    entries[:r, :r] = -M.imag
    entries[:r, r:] = M.real
    entries[r:, :r] = -M.real
    entries[r:, r:] = -M.imag
    metric = np.zeros((2 * r, 2 * r))
    metric[:r, :r] = M.real
    metric[:r, r:] = M.imag
    metric[r:, :r] = -M.imag
    metric[r:, r:] = M.real
    eigs = np.linalg.eigvalsh(metric)
    for arr in (entries, metric, M):
        arr.setflags(write=False)
    return KahlerMatrix(
        dimension=2 * r,
        entries=entries,
        metric_part=metric,
        complex_coeff=M,
        hermitian_defect=herm_defect / max(1.0, float(np.linalg.norm(M))),
        kappa=kappa,
        min_metric_eigenvalue=float(eigs[0]),
    )


# ---------------------------------------------------------------------------
# Volumes and the coupling derivative.


def one_vortex_volume(geom: TorusGeometry, tau: float, tol: float = 1e-10) -> float:
    """L2 volume of the one-vortex moduli space.

    By translation invariance the form is constant over the moduli torus,
    so the volume is sigma(lift d_x, lift d_y) * area, evaluated at one
    (arbitrary) vortex position.
    """
    params = vortex_params(geom, divisor(geom, [0.0]), tau)
    sol = solve_taubes(params, tol=tol)
    lx = translation_lift(sol, 1.0)
    ly = translation_lift(sol, 1j)
    return evaluate_sigma(lx, ly) * geom.area


def dh_slope(geom: TorusGeometry, tau: float, h: float = 0.1) -> float:
    """Centered difference d Vol / d tau for the one-vortex volume."""
    if h <= 0.0:
        raise ValueError("step h must be positive")
    vol_p = one_vortex_volume(geom, tau + h)
    vol_m = one_vortex_volume(geom, tau - h)
    return (vol_p - vol_m) / (2.0 * h)

"""Abelian vortices on a flat torus via the scalar reduction.

A degree-r vortex configuration (A, psi) at coupling tau is determined by
its zero divisor D = sum m_j z_j and the real field u = log|psi|^2, which
solves

    Delta u = e^u - 2 tau + 4 pi sum_j m_j delta_{z_j}

subject to the integrability (Bradlow) bound tau * area > 2 pi r.  The
delta functions are absorbed by the singular background

    u0 = sum_j 4 pi m_j G(., z_j),     Delta u0 = 4 pi sum_j m_j delta_{z_j} - 4 pi r / A,

leaving a smooth unknown v = u - u0 with

    Delta v = e^{u0 + v} - 2 tau + 4 pi r / A,

which Newton's method solves: each step inverts (-Delta + e^u), the same
operator the moduli pairing uses.  The iteration starts from the constant
v0 = log(2 tau A - 4 pi r) - log(integral e^{u0}), which matches the total
mass exactly, and stops when the sup of the residual drops below the
tolerance relative to max(1, 2 tau).

Quantities built from |psi|^2 = e^u vanish like |z - z_j|^{2 m_j} at the
cores while nonlinear combinations with grad(u0) blow up there, so the
products are assembled analytically:

    e^{u0}            exact zeros at core nodes,
    d/dz e^{u0}       = e^{u0} * d/dz u0, zero at core nodes,
    Q = e^{u0} |grad u0|^2,  at a core node 4 e^{a_j} for m_j = 1, else 0,

with a_j the regular part of u0 at z_j.  Everything downstream (density,
curvature, pairing weights) is a smooth combination of these with v, so no
0 * inf ever appears on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from types import SimpleNamespace

import numpy as np

from ._elliptic import shifted_laplacian_solve
from .surface import (
    GridField,
    PointOnTorus,
    TorusGeometry,
    _COINCIDENCE_TOL,
    _greens_bundle,
    _laplacian_arr,
    _reduce_half,
    greens_value,
    integrate,
    spectral_gradient,
    torus_point,
)

__all__ = [
    "Divisor",
    "VortexParams",
    "TaubesSolution",
    "DegenerateSolution",
    "ResidualReport",
    "BradlowError",
    "ConvergenceError",
    "divisor",
    "vortex_params",
    "bradlow_margin",
    "singular_background",
    "solve_taubes",
    "bradlow_limit",
    "density_field",
    "curvature_field",
    "verify_solution",
]


class BradlowError(ValueError):
    """The coupling violates tau * area > 2 pi * degree.

    at_limit is True when the product sits on the bound to within roundoff,
    in which case the degenerate branch (bradlow_limit) applies instead.
    """

    def __init__(self, tau_area, bound, at_limit):
        self.tau_area = tau_area
        self.bound = bound
        self.at_limit = at_limit
        if at_limit:
            msg = (
                f"tau * area = {tau_area!r} sits at the bound 2 pi r = {bound!r}; "
                "the smooth vortex branch degenerates, use bradlow_limit"
            )
        else:
            msg = (
                f"tau * area = {tau_area!r} must exceed 2 pi r = {bound!r} "
                "for vortices of this degree to exist"
            )
        super().__init__(msg)


class ConvergenceError(RuntimeError):
    """Newton iteration failed to reach the requested residual."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = tuple(history)


@dataclass(frozen=True)
class Divisor:
    """Effective divisor sum m_j z_j on the torus, canonically ordered."""

    points: tuple[PointOnTorus, ...]
    multiplicities: tuple[int, ...]

    @property
    def degree(self) -> int:
        return sum(self.multiplicities)


def divisor(geom: TorusGeometry, points, multiplicities=None) -> Divisor:
    """Canonical divisor from points and multiplicities.

    Each point may be a PointOnTorus, a complex plane position, or an
    (s, t) pair of lattice fractions.  Points are reduced to the
    fundamental cell; points closer than the coincidence tolerance merge
    with summed multiplicity; the result is sorted by lattice fractions,
    so divisors built from the same reduced points compare equal (points
    shifted by whole periods agree only to roundoff).
    """
    pts = []
    for p in points:
        if isinstance(p, PointOnTorus):
            pts.append(p)
        elif isinstance(p, (tuple, list)):
            pts.append(torus_point(geom, lattice=p))
        else:
            pts.append(torus_point(geom, z=p))
    if multiplicities is None:
        multiplicities = [1] * len(pts)
    mults = [int(m) for m in multiplicities]
    if len(mults) != len(pts):
        raise ValueError("need one multiplicity per point")
    if any(m < 1 for m in mults):
        raise ValueError("multiplicities must be positive")
    merged: list[tuple[PointOnTorus, int]] = []
    for p, m in zip(pts, mults):
        for i, (q, mq) in enumerate(merged):
            ds = float(_reduce_half(np.asarray(p.s - q.s)))
            dt = float(_reduce_half(np.asarray(p.t - q.t)))
            if abs(ds) < _COINCIDENCE_TOL and abs(dt) < _COINCIDENCE_TOL:
                merged[i] = (q, mq + m)
                break
        else:
            merged.append((p, m))
    merged.sort(key=lambda pm: (pm[0].s, pm[0].t))
    return Divisor(
        points=tuple(p for p, _ in merged),
        multiplicities=tuple(m for _, m in merged),
    )


@dataclass(frozen=True)
class VortexParams:
    """Geometry, zero divisor and coupling tau of one vortex problem."""

    geometry: TorusGeometry
    divisor: Divisor
    tau: float

    @property
    def degree(self) -> int:
        return self.divisor.degree

    @property
    def tau_area(self) -> float:
        return self.tau * self.geometry.area


def vortex_params(geom: TorusGeometry, div: Divisor, tau) -> VortexParams:
    tau = float(tau)
    if not (math.isfinite(tau) and tau > 0.0):
        raise ValueError(f"coupling tau must be positive, got {tau}")
    if div.degree < 1:
        raise ValueError("divisor must have positive degree")
    return VortexParams(geometry=geom, divisor=div, tau=tau)


def bradlow_margin(params: VortexParams) -> float:
    """tau * area - 2 pi * degree; vortices exist iff this is positive."""
    return params.tau_area - 2.0 * math.pi * params.degree


_LIMIT_RTOL = 1e-12


def _classify_margin(params: VortexParams) -> str:
    margin = bradlow_margin(params)
    scale = max(1.0, params.tau_area)
    if abs(margin) <= _LIMIT_RTOL * scale:
        return "limit"
    return "interior" if margin > 0.0 else "violated"


@lru_cache(maxsize=16)
def _background(params: VortexParams) -> SimpleNamespace:
    """Singular background u0 and its regularized core bundle."""
    geom = params.geometry
    div = params.divisor
    u0 = np.zeros(geom.grid_dims)
    dz_u0 = np.zeros(geom.grid_dims, dtype=np.complex128)
    bundles = [_greens_bundle(geom, p) for p in div.points]
    core_nodes = []
    for j, (p, m) in enumerate(zip(div.points, div.multiplicities)):
        b = bundles[j]
        u0 += 4.0 * math.pi * m * b.values
        dz_u0 += 4.0 * math.pi * m * b.dz
        if b.singular_node is not None:
            core_nodes.append((b.singular_node, j))
    # Regular part of u0 at each core: own kernel's regular value plus the
    # other kernels evaluated across.
    reg_values = []
    for j, (p, m) in enumerate(zip(div.points, div.multiplicities)):
        a = 4.0 * math.pi * m * bundles[j].regular_center
        for k, (q, mk) in enumerate(zip(div.points, div.multiplicities)):
            if k != j:
                a += 4.0 * math.pi * mk * greens_value(geom, q, p.z)
        reg_values.append(a)
    exp_u0 = np.exp(u0)
    q_arr = 4.0 * exp_u0 * (dz_u0.real**2 + dz_u0.imag**2)
    for (node, j) in core_nodes:
        # u0 at a coinciding node holds its regular part; the true fields
        # have limits e^{u0} -> 0 and Q -> 4 m^2 e^{a_j} |z|^{2m-2}.
        exp_u0[node] = 0.0
        dz_u0[node] = 0.0
        m = div.multiplicities[j]
        q_arr[node] = 4.0 * math.exp(reg_values[j]) if m == 1 else 0.0
    dz_exp_u0 = exp_u0 * dz_u0
    for arr in (u0, exp_u0, dz_exp_u0, q_arr):
        arr.setflags(write=False)
    return SimpleNamespace(
        u0=u0,
        exp_u0=exp_u0,
        dz_exp_u0=dz_exp_u0,
        q=q_arr,
        core_nodes=tuple(node for node, _ in core_nodes),
        reg_values=tuple(reg_values),
    )


def singular_background(params: VortexParams) -> GridField:
    """u0 = sum 4 pi m_j G(., z_j); core nodes hold the regular part."""
    b = _background(params)
    return GridField(params.geometry, b.u0, singular_nodes=b.core_nodes)


@dataclass(eq=False)
class TaubesSolution:
    """Converged vortex solution: background plus smooth correction v."""

    params: VortexParams
    v: GridField
    newton_iters: int
    residual_linf: float
    residual_history: tuple[float, ...]
    bradlow_defect: float
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def u(self) -> GridField:
        """log|psi|^2 on the grid (regular part substituted at core nodes)."""
        if "u" not in self._cache:
            bg = _background(self.params)
            self._cache["u"] = GridField(self.params.geometry, bg.u0 + self.v.values)
        return self._cache["u"]

    @property
    def degree(self) -> int:
        return self.params.degree


@dataclass(frozen=True)
class DegenerateSolution:
    """The tau * area = 2 pi r branch: psi vanishes, curvature is uniform."""

    params: VortexParams


def bradlow_limit(params: VortexParams, tol: float = _LIMIT_RTOL) -> DegenerateSolution:
    """Solution at the integrability bound: |psi|^2 = 0, *iF = tau everywhere."""
    margin = bradlow_margin(params)
    if abs(margin) > tol * max(1.0, params.tau_area):
        raise ValueError(
            f"tau * area - 2 pi r = {margin!r} is not at the bound; "
            "the degenerate branch only exists there"
        )
    return DegenerateSolution(params=params)


def solve_taubes(
    params: VortexParams,
    tol: float = 1e-10,
    max_iter: int = 25,
    inner_rtol: float = 1e-3,
) -> TaubesSolution:
    """Newton-solve the reduced vortex equation to sup-residual tol.

    The residual F(v) = Delta v - e^{u0+v} + 2 tau - 4 pi r / A is measured
    in sup norm relative to max(1, 2 tau).  Each step solves
    (-Delta + e^u) dv = F(v) by preconditioned conjugate gradients to a
    loose relative tolerance (inner_rtol), which is all the outer
    quadratic convergence needs.  Raises BradlowError off the existence
    range and ConvergenceError (with the residual history attached) if
    max_iter steps do not reach tol.
    """
    status = _classify_margin(params)
    if status != "interior":
        raise BradlowError(
            params.tau_area, 2.0 * math.pi * params.degree, at_limit=(status == "limit")
        )
    geom = params.geometry
    tau = params.tau
    area = geom.area
    r = params.degree
    bg = _background(params)
    mass = 2.0 * tau * area - 4.0 * math.pi * r
    const = 2.0 * tau - 4.0 * math.pi * r / area
    scale = max(1.0, 2.0 * tau)

    v = np.full(geom.grid_dims, math.log(mass) - math.log(float(bg.exp_u0.mean()) * area))
    history = []
    for step in range(max_iter + 1):
        eu = bg.exp_u0 * np.exp(v)
        resid = _laplacian_arr(geom, v) - eu + const
        res = float(np.max(np.abs(resid))) / scale
        history.append(res)
        if res <= tol:
            break
        if step == max_iter:
            raise ConvergenceError(
                f"Newton residual {res:.3e} after {max_iter} steps (target {tol:.1e})",
                history,
            )
        dv, _, _ = shifted_laplacian_solve(geom, eu, resid, rtol=inner_rtol)
        v = v + dv
    defect = abs(float(eu.mean()) * area - mass)
    return TaubesSolution(
        params=params,
        v=GridField(geom, v),
        newton_iters=step,
        residual_linf=res,
        residual_history=tuple(history),
        bradlow_defect=defect,
    )


# ---------------------------------------------------------------------------
# Derived fields. The solution caches them; all are assembled from the
# regularized background bundle so core nodes carry exact limits.


def _derived(sol: TaubesSolution) -> SimpleNamespace:
    if "derived" in sol._cache:
        return sol._cache["derived"]
    geom = sol.params.geometry
    bg = _background(sol.params)
    v = sol.v.values
    exp_v = np.exp(v)
    eu = bg.exp_u0 * exp_v
    gx, gy = spectral_gradient(sol.v)
    vx, vy = gx.values, gy.values
    dz_v = 0.5 * (vx - 1j * vy)
    # p = d/dz e^u, smooth through the cores.
    p = exp_v * (bg.dz_exp_u0 + bg.exp_u0 * dz_v)
    # T = grad e^{u0} from the complex derivative of a real field.
    tx = 2.0 * bg.dz_exp_u0.real
    ty = -2.0 * bg.dz_exp_u0.imag
    # k = (1/4) e^u |grad u|^2, expanded so only smooth factors appear.
    k = 0.25 * exp_v * (bg.q + 2.0 * (tx * vx + ty * vy) + bg.exp_u0 * (vx * vx + vy * vy))
    out = SimpleNamespace(eu=eu, exp_v=exp_v, vx=vx, vy=vy, p=p, k=k)
    sol._cache["derived"] = out
    return out


def density_field(sol) -> GridField:
    """|psi|^2 = e^u as a grid field (identically zero on the degenerate branch)."""
    if isinstance(sol, DegenerateSolution):
        return GridField(sol.params.geometry, np.zeros(sol.params.geometry.grid_dims))
    return GridField(sol.params.geometry, _derived(sol).eu)


def curvature_field(sol) -> GridField:
    """*iF = tau - |psi|^2 / 2 as a grid field."""
    if isinstance(sol, DegenerateSolution):
        return GridField(
            sol.params.geometry, np.full(sol.params.geometry.grid_dims, sol.params.tau)
        )
    return GridField(sol.params.geometry, sol.params.tau - 0.5 * _derived(sol).eu)


@dataclass(frozen=True)
class ResidualReport:
    """Numerical certificate for a solution.

    pde_residual is the sup of Delta v - e^u + 2 tau - 4 pi r / A over the
    grid, scaled by max(1, 2 tau).  mass_defect is |integral e^u -
    (2 tau A - 4 pi r)|; flux_defect = |integral (tau - e^u / 2) - 2 pi r|
    is the same number halved, because discretely the two identities are
    one (the spectral Laplacian integrates to exactly zero).
    positivity_margin = 2 tau - max e^u must be positive for an interior
    solution.  grid_defect, when requested, is the sup difference of the
    density e^u against a solve on the doubled grid at shared nodes
    (density rather than v, because the additive normalization of the
    background, and hence of v, is grid dependent while e^u is not).
    """

    pde_residual: float
    mass_defect: float
    mass_defect_rel: float
    flux_defect: float
    positivity_margin: float
    density_min: float
    newton_iters: int
    converged: bool
    grid_defect: float | None = None


def verify_solution(sol, doubled_grid: bool = False) -> ResidualReport:
    """Recompute the defining identities of a solution from scratch."""
    if isinstance(sol, DegenerateSolution):
        return ResidualReport(
            pde_residual=0.0,
            mass_defect=0.0,
            mass_defect_rel=0.0,
            flux_defect=0.0,
            positivity_margin=2.0 * sol.params.tau,
            density_min=0.0,
            newton_iters=0,
            converged=True,
            grid_defect=None,
        )
    params = sol.params
    geom = params.geometry
    tau = params.tau
    r = params.degree
    d = _derived(sol)
    const = 2.0 * tau - 4.0 * math.pi * r / geom.area
    resid = _laplacian_arr(geom, sol.v.values) - d.eu + const
    pde_res = float(np.max(np.abs(resid))) / max(1.0, 2.0 * tau)
    mass = 2.0 * tau * geom.area - 4.0 * math.pi * r
    mass_defect = abs(float(d.eu.mean()) * geom.area - mass)
    grid_defect = None
    if doubled_grid:
        n1, n2 = geom.grid_dims
        fine_geom = TorusGeometry(geom.period_ratio, geom.scale, (2 * n1, 2 * n2))
        fine = solve_taubes(VortexParams(fine_geom, params.divisor, params.tau))
        fine_eu = _derived(fine).eu[::2, ::2]
        grid_defect = float(np.max(np.abs(fine_eu - d.eu)))
    return ResidualReport(
        pde_residual=pde_res,
        mass_defect=mass_defect,
        mass_defect_rel=mass_defect / mass,
        flux_defect=0.5 * mass_defect,
        positivity_margin=2.0 * tau - float(d.eu.max()),
        density_min=float(d.eu.min()),
        newton_iters=sol.newton_iters,
        converged=sol.residual_linf <= 1e-9,
        grid_defect=grid_defect,
    )

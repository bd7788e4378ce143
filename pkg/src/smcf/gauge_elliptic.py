"""Fixed-time elliptic solver for the gauge variables.

Given the complex scalar mean curvature psi on the grid, recover the
full gauge state (second fundamental form lambda, metric g, advection
field V, spatial connection A, temporal connection B) by an outer
contraction iteration over the coupled elliptic system:

  * a div-curl system for lambda driven by the gauged gradient of psi,
  * the harmonic-coordinate quasilinear equation for g,
  * a covariant Laplace equation for V,
  * a div-curl system for A with the Coulomb condition built in,
  * a Laplace-Beltrami equation for B.

All torus zero modes are projected out (the compatibility integrals
that vanish on decaying data need not vanish on the torus); discarded
means are surfaced through the constraint report's non-decay entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from smcf import geometry as geo
from smcf import norms as nrm
from smcf import spectral as sp
from smcf.geometry import MetricField, NotContractingError
from smcf.spectral import Grid

__all__ = [
    "EllipticConfig",
    "GaugeState",
    "SmallnessViolatedError",
    "LostPositivityError",
    "flat_lambda",
    "recover_lambda",
    "solve_metric",
    "solve_VAB",
    "metric_equation_residual",
    "advection_equation_residual",
    "temporal_equation_residual",
    "solve_elliptic_system",
    "gauge_norm",
    "LinearResponse",
    "linearize_fd",
]


class SmallnessViolatedError(ValueError):
    """The data exceeds the smallness threshold the solver relies on."""


class LostPositivityError(RuntimeError):
    """The metric iterate stopped being positive definite."""


@dataclass(frozen=True)
class EllipticConfig:
    tol: float = 1e-10
    max_iter: int = 200
    under_relaxation: float = 1.0
    smallness_threshold: float = 0.05
    stall_limit: int = 10

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("need tol > 0 and max_iter >= 1")
        if not 0 < self.under_relaxation <= 1:
            raise ValueError("under-relaxation must lie in (0, 1]")


@dataclass(frozen=True)
class GaugeState:
    """Converged gauge variables for one psi at one time."""

    grid: Grid
    psi: np.ndarray
    metric: MetricField
    lam: np.ndarray
    V: np.ndarray
    A: np.ndarray
    B: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def constraint_report(self, mean_project: bool = True) -> geo.ConstraintReport:
        return geo.constraint_residuals(
            self.grid, self.psi, self.metric, self.lam, self.A, mean_project
        )


def _raise1(metric, T):
    """T^a_b = g^{am} T_{mb}."""
    return np.einsum("am...,mb...->ab...", metric.inv, T)


def _raise2(metric, T):
    """T^{ab} = g^{am} g^{bn} T_{mn}."""
    return np.einsum("am...,bn...,mn...->ab...", metric.inv, metric.inv, T)


def _mean_zero(grid, f):
    return f - np.mean(f, axis=grid.spatial_axes, keepdims=True)


def _iterate(update, x0, cfg, name, tol=None):
    """Damped fixed-point driver with stall detection."""
    tol = cfg.tol if tol is None else tol
    x = x0
    last = np.inf
    stall = 0
    for it in range(cfg.max_iter):
        x_new = update(x)
        if cfg.under_relaxation != 1.0:
            x_new = x + cfg.under_relaxation * (x_new - x)
        change = float(np.max(np.abs(x_new - x))) if x_new.size else 0.0
        x = x_new
        if change <= tol:
            return x, it + 1
        if change >= last:
            stall += 1
            if stall >= cfg.stall_limit:
                raise NotContractingError(
                    f"{name}: update norm stopped decreasing", residual=change
                )
        else:
            stall = 0
        last = change
    raise NotContractingError(f"{name}: no convergence in {cfg.max_iter} iterations",
                              residual=last)


def _hodge_solve(grid, curl, div):
    """Flat div-curl solve: d_a u_b - d_b u_a = curl_ab, d_a u_a = div.

    Frequency-wise u_b = (xi_b div + xi_a curl_ab) / (i |xi|^2); the
    zero mode is dropped (torus kernel).
    """
    Ch = grid.fft(curl)
    Dh = grid.fft(div)
    k = grid.wavenumbers()
    k2 = grid.k_squared()
    num = k * Dh[np.newaxis] + np.einsum("a...,ab...->b...", k, Ch)
    denom = np.where(k2 > 0, k2, 1.0)
    uh = np.where(k2 > 0, num / (1j * denom), 0.0)
    return grid.ifft(uh)


def flat_lambda(grid: Grid, psi: np.ndarray) -> np.ndarray:
    """Closed-form div-curl solution at g = I, A = 0: the Hessian of the
    mean-projected inverse Laplacian of psi."""
    ph = grid.fft(psi)
    k = grid.wavenumbers()
    k2 = grid.k_squared()
    denom = np.where(k2 > 0, k2, 1.0)
    lam_h = np.einsum("a...,b...->ab...", k, k) * np.where(k2 > 0, ph / denom, 0.0)
    return grid.ifft(lam_h)


def recover_lambda(grid, psi, metric, A, cfg: EllipticConfig) -> np.ndarray:
    """Solve the div-curl system for the second fundamental form.

    Covariant curl-freeness and the gauged divergence identity are
    rewritten as a flat Hodge system per column with the metric and
    connection corrections iterated to a fixed point; the iterate is
    symmetrized every sweep.
    """
    Gam = metric.christoffel
    dpsi = sp.gradient(grid, psi) + 1j * A * psi  # gauged gradient of psi

    def update(lam):
        # flat curl data: Gamma and A corrections of the covariant curl
        gl = np.einsum("sag...,bs...->abg...", Gam, lam)
        C = gl - np.einsum("abg...->bag...", gl)
        C = C - 1j * np.einsum("a...,bg...->abg...", A, lam) \
            + 1j * np.einsum("b...,ag...->abg...", A, lam)
        # flat divergence data: move the non-flat part of the gauged
        # covariant divergence to the right-hand side
        dlam = geo.covariant_derivative(grid, lam, 0, 2, metric, A)  # (c, a, b)
        cov_div = np.einsum("ca...,cab...->b...", metric.inv, dlam)
        flat_div = np.einsum("aab...->b...", sp.gradient(grid, lam))
        D = dpsi - cov_div + flat_div
        lam_new = np.empty_like(lam)
        for g in range(grid.d):
            lam_new[:, g] = _hodge_solve(grid, C[:, :, g], D[g])
        return 0.5 * (lam_new + np.einsum("ab...->ba...", lam_new))

    lam0 = flat_lambda(grid, psi)
    lam, _ = _iterate(update, lam0, cfg, "lambda recovery")
    return lam


def _metric_rhs(grid, m, lam, psi):
    """Right-hand side of the harmonic-coordinate metric equation."""
    dg = sp.gradient(grid, m.g).real       # (c, a, b) = d_c g_ab
    dginv = sp.gradient(grid, m.inv).real  # (c, a, b) = d_c g^{ab}
    t = np.einsum("gab...,bas...->gs...", dginv, dg)
    rhs = -t - np.einsum("gs...->sg...", t)
    rhs += np.einsum("gab...,sab...->gs...", dg, dginv)
    gam_low = np.einsum("nm...,msa...->nsa...", m.g, m.christoffel)
    rhs += 2.0 * np.einsum("ab...,nsa...,nbg...->gs...",
                           m.inv, gam_low, m.christoffel)
    lam_up = _raise1(m, lam)
    rhs -= 2.0 * ((lam * np.conj(psi)).real
                  - np.einsum("ag...,as...->gs...", lam, np.conj(lam_up)).real)
    return rhs


def _weighted_second(grid, coeff, g):
    """coeff^{ab}(x) d^2_{ab} g, accumulated pairwise to bound memory."""
    k = grid.wavenumbers()
    gh = grid.fft(g)
    acc = np.zeros(g.shape)
    for a in range(grid.d):
        for b in range(a, grid.d):
            d2 = grid.ifft(-k[a] * k[b] * gh).real
            fac = 1.0 if a == b else 2.0
            acc += fac * coeff[a, b] * d2
    return acc


def metric_equation_residual(grid, metric, lam, psi):
    """Literal left-minus-right of the metric equation (mean-projected)."""
    lhs = _weighted_second(grid, metric.inv, metric.g)
    res = lhs - _metric_rhs(grid, metric, lam, psi)
    return _mean_zero(grid, res)


def solve_metric(grid, lam, psi, cfg: EllipticConfig, g0: MetricField | None = None):
    """Solve the harmonic-coordinate quasilinear equation for the metric.

    g^{ab} d^2_{ab} g_{cs} equals quadratic first-derivative terms plus
    the curvature source -2 Re(lam_{cs} conj(psi) - lam_{ac} conj(lam)^a_s);
    Picard iteration with the flat Laplacian as preconditioner.
    """
    h0 = g0.h if g0 is not None else np.zeros((grid.d, grid.d) + grid.shape)
    eye = np.eye(grid.d).reshape((grid.d, grid.d) + (1,) * grid.d)

    def update(h):
        try:
            m = MetricField.from_h(grid, 0.5 * (h + np.einsum("ab...->ba...", h)))
        except geo.SingularMetricError as exc:
            raise LostPositivityError(str(exc)) from exc
        rhs = _metric_rhs(grid, m, lam, psi)
        # move the variable-coefficient part of the principal term over
        acc = _weighted_second(grid, m.inv - eye, m.g)
        h_new = sp.inverse_laplacian(grid, rhs - acc).real
        h_new = 0.5 * (h_new + np.einsum("ab...->ba...", h_new))
        return _mean_zero(grid, h_new)

    h, _ = _iterate(update, h0, cfg, "metric equation")
    try:
        return MetricField.from_h(grid, h)
    except geo.SingularMetricError as exc:
        raise LostPositivityError(str(exc)) from exc


def _vector_laplacian(grid, V, metric):
    d1 = geo.covariant_derivative(grid, V, 1, 0, metric)        # (g, c)
    d2 = geo.covariant_derivative(grid, d1, 1, 1, metric)       # (g, c2, c1)
    return np.einsum("bc...,gbc...->g...", metric.inv, d2)


def _grad_up(grid, metric, V):
    """nabla^a V^b for a vector field V."""
    gradV = geo.covariant_derivative(grid, V, 1, 0, metric).real  # (b, c)
    return np.einsum("ac...,bc...->ab...", metric.inv, gradV)


def _advection_rhs(grid, metric, lam, psi, V):
    """Right-hand side of the advection-field equation, at the given V."""
    lam_up1 = _raise1(metric, lam)
    lam_up2 = _raise2(metric, lam)
    M = (lam_up2 * np.conj(psi)).imag                     # Im(lam^{ag} psi-bar)
    dM = geo.covariant_derivative(grid, M, 2, 0, metric)  # (a, g, c)
    rhs = 2.0 * np.einsum("aga...->g...", dM).real
    W = (lam_up1 * np.conj(psi)).real \
        - np.einsum("as...,ag...->gs...", lam, np.conj(lam_up2)).real
    rhs -= np.einsum("gs...,s...->g...", W, V)
    lam_psi_up = (psi * np.conj(lam_up2)).imag            # Im(psi lam-bar^{ab})
    rhs += 2.0 * np.einsum("ab...,gab...->g...",
                           lam_psi_up + _grad_up(grid, metric, V),
                           metric.christoffel)
    return rhs


def advection_equation_residual(grid, metric, lam, psi, V):
    """Literal left-minus-right of the advection equation (mean-projected)."""
    res = _vector_laplacian(grid, V, metric).real \
        - _advection_rhs(grid, metric, lam, psi, V)
    return _mean_zero(grid, res)


def _temporal_rhs(grid, metric, lam, psi, V, A):
    """Right-hand side of the temporal-connection equation."""
    lam_up1 = _raise1(metric, lam)
    lam_up2 = _raise2(metric, lam)
    N = (lam_up1 * np.conj(psi)).real                      # Re(lam^s_g psi-bar)
    dN = geo.covariant_derivative(grid, N, 1, 1, metric)   # (s, c, g)
    wvec = np.einsum("ssg...->g...", dN).real
    dw = geo.covariant_derivative(grid, wvec, 0, 1, metric).real
    rhs = -np.einsum("cg...,cg...->...", metric.inv, dw)
    rhs += 0.5 * metric.laplace_beltrami((psi * np.conj(psi)).real).real
    u = np.einsum("sg...,sb...,b...->g...", lam_up1, np.conj(lam), V).imag
    du = geo.covariant_derivative(grid, u, 0, 1, metric).real
    rhs += np.einsum("cg...,cg...->...", metric.inv, du)
    gradV_up = _grad_up(grid, metric, V)
    sym = 2.0 * (psi * np.conj(lam_up2)).imag \
        + gradV_up + np.einsum("ab...->ba...", gradV_up)
    rhs += np.einsum("bg...,bg...->...", sym, sp.gradient(grid, A).real)
    return rhs


def temporal_equation_residual(grid, metric, lam, psi, V, A, B):
    """Literal left-minus-right of the temporal equation (mean-projected)."""
    res = metric.laplace_beltrami(B).real \
        - _temporal_rhs(grid, metric, lam, psi, V, A)
    return _mean_zero(grid, res)


def solve_VAB(grid, lam, psi, metric, cfg: EllipticConfig, warm=None):
    """Solve the three remaining elliptic equations: V, A, then B."""
    d = grid.d
    if warm is None:
        V0 = np.zeros((d,) + grid.shape)
        A0 = np.zeros((d,) + grid.shape)
    else:
        V0, A0 = warm[0], warm[1]
    lam_up1 = _raise1(metric, lam)
    defect = metric.harmonic_defect()

    # --- advection field V: covariant vector Laplace equation ---------
    def update_V(V):
        rhs = _advection_rhs(grid, metric, lam, psi, V)
        V_new = V + sp.inverse_laplacian(
            grid, rhs - _vector_laplacian(grid, V, metric).real
        ).real
        return _mean_zero(grid, V_new)

    V, _ = _iterate(update_V, V0, cfg, "advection field")

    # --- connection A: div-curl with the Coulomb condition ------------
    F = np.einsum("ga...,bg...->ab...", lam_up1, np.conj(lam)).imag
    w = metric.inv - np.eye(d).reshape((d, d) + (1,) * d)

    def update_A(A):
        dA = sp.gradient(grid, A).real  # (c, b) = d_c A_b
        div_data = -np.einsum("cb...,cb...->...", w, dA) \
            + np.einsum("c...,c...->...", defect, A)
        A_new = _hodge_solve(grid, F, div_data).real
        return A_new

    A, _ = _iterate(update_A, A0, cfg, "Coulomb connection")

    # --- temporal connection B: Laplace-Beltrami equation -------------
    rhs_B = _temporal_rhs(grid, metric, lam, psi, V, A)

    def update_B(B):
        B_new = B + sp.inverse_laplacian(
            grid, rhs_B - metric.laplace_beltrami(B).real
        ).real
        return _mean_zero(grid, B_new)

    B, _ = _iterate(update_B, np.zeros(grid.shape), cfg, "temporal connection")
    return V, A, B


def solve_elliptic_system(grid, psi, cfg: EllipticConfig | None = None,
                          warm: GaugeState | None = None) -> GaugeState:
    """Outer contraction over lambda -> g -> (V, A, B) to a joint fixed point.

    ``warm`` seeds the iteration from a previously converged state
    (e.g. the previous time step); the result is still iterated to the
    same joint fixed-point tolerance.
    """
    cfg = cfg or EllipticConfig()
    if grid.d < 2:
        raise ValueError("the div-curl structure needs dimension >= 2")
    table = nrm.exponents(grid.d)
    size = sp.hs_norm(grid, psi, table.s_d)
    if size > cfg.smallness_threshold:
        raise SmallnessViolatedError(
            f"||psi||_H^{table.s_d:g} = {size:.3e} exceeds the smallness "
            f"threshold {cfg.smallness_threshold:g}"
        )

    if warm is not None:
        metric, V, A, B, lam = warm.metric, warm.V, warm.A, warm.B, warm.lam
    else:
        metric = MetricField.identity(grid)
        V = np.zeros((grid.d,) + grid.shape)
        A = np.zeros((grid.d,) + grid.shape)
        B = np.zeros(grid.shape)
        lam = np.zeros((grid.d, grid.d) + grid.shape, dtype=complex)
    final_update = 0.0
    sweeps = 0
    for sweep in range(cfg.max_iter):
        lam_new = recover_lambda(grid, psi, metric, A, cfg)
        metric_new = solve_metric(grid, lam_new, psi, cfg, g0=metric)
        V_new, A_new, B_new = solve_VAB(grid, lam_new, psi, metric_new, cfg,
                                        warm=(V, A, B))
        final_update = max(
            float(np.max(np.abs(lam_new - lam))),
            float(np.max(np.abs(metric_new.g - metric.g))),
            float(np.max(np.abs(V_new - V))),
            float(np.max(np.abs(A_new - A))),
            float(np.max(np.abs(B_new - B))),
        )
        lam, metric, V, A, B = lam_new, metric_new, V_new, A_new, B_new
        sweeps = sweep + 1
        if final_update <= cfg.tol:
            break
    else:
        raise NotContractingError("outer elliptic sweep did not converge",
                                  residual=final_update)

    state = GaugeState(grid=grid, psi=psi, metric=metric, lam=lam, V=V, A=A, B=B)
    report = state.constraint_report()
    state.diagnostics.update(
        outer_iterations=sweeps,
        final_update=final_update,
        residuals=report,
        psi_sobolev_norm=size,
    )
    return state


def gauge_norm(grid, h, V, A, B, s: float) -> float:
    """Fixed-time norm of the gauge variables:
    || |D|h ||_{H^{s+1}} + || |D|V ||_{H^s} + ||A||_{H^{s+1}} + || |D|B ||_{H^{s-1}}.
    """
    def riesz1(f):
        return sp.sobolev_multiplier(grid, f, 1.0, kind="riesz")

    return (
        sp.hs_norm(grid, riesz1(h), s + 1.0)
        + sp.hs_norm(grid, riesz1(V), s)
        + sp.hs_norm(grid, A, s + 1.0)
        + sp.hs_norm(grid, riesz1(B), s - 1.0)
    )


@dataclass(frozen=True)
class LinearResponse:
    """Central-difference directional derivative of the solution map."""

    dlam: np.ndarray
    dh: np.ndarray
    dV: np.ndarray
    dA: np.ndarray
    dB: np.ndarray
    tau: float
    ratio: float


def linearize_fd(grid, psi, dpsi, cfg: EllipticConfig | None = None,
                 tau: float | None = None, sigma: float | None = None):
    """Directional derivative of psi -> (lambda, h, V, A, B) by central
    finite differences of two full elliptic solves."""
    cfg = cfg or EllipticConfig()
    if tau is None:
        base = sp.l2_norm(grid, psi)
        tau = 1e-4 * (base if base > 0 else 1.0) / sp.l2_norm(grid, dpsi)
    plus = solve_elliptic_system(grid, psi + tau * dpsi, cfg)
    minus = solve_elliptic_system(grid, psi - tau * dpsi, cfg)
    inv2t = 1.0 / (2.0 * tau)
    dlam = (plus.lam - minus.lam) * inv2t
    dh = (plus.metric.g - minus.metric.g) * inv2t
    dV = (plus.V - minus.V) * inv2t
    dA = (plus.A - minus.A) * inv2t
    dB = (plus.B - minus.B) * inv2t
    if sigma is None:
        sigma = max(nrm.exponents(grid.d).sigma_d, 1.0)
    num = sp.hs_norm(grid, dlam, sigma) + gauge_norm(grid, dh, dV, dA, dB, sigma)
    ratio = num / sp.hs_norm(grid, dpsi, sigma)
    return LinearResponse(dlam=dlam, dh=dh, dV=dV, dA=dA, dB=dB,
                          tau=tau, ratio=ratio)

"""Tensor calculus on the periodic box with a perturbed flat metric.

Christoffel symbols, (gauge-)covariant derivatives, curvature, the
intrinsic Sobolev norms built from covariant derivatives, the energy
functionals, the constraint-residual report for the gauge system, and
the harmonic-coordinate fixing map.

Tensor fields are numpy arrays with index axes leading and the spatial
grid trailing, upper indices first.  A rank-(r, s) tensor has shape
(d,)*(r+s) + grid.shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from smcf import spectral as sp
from smcf.spectral import Grid

__all__ = [
    "MetricField",
    "SingularMetricError",
    "NotContractingError",
    "covariant_derivative",
    "curvature",
    "tensor_norm_sq_field",
    "intrinsic_norm",
    "flat_sobolev_norm",
    "energy",
    "Residual",
    "ConstraintReport",
    "constraint_residuals",
    "gauss_bilinear",
    "trig_interp",
    "harmonic_coordinate_fix",
]


class SingularMetricError(ValueError):
    """Metric failed the positive-definiteness check."""


class NotContractingError(RuntimeError):
    """A fixed-point iteration stopped making progress."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class MetricField:
    """Riemannian metric g = I + h on the grid, with cached derived data.

    The inverse, Christoffel symbols and volume density are computed
    once at construction; instances are treated as immutable.
    """

    def __init__(self, grid: Grid, g: np.ndarray):
        g = np.asarray(g, dtype=float)
        if g.shape != (grid.d, grid.d) + grid.shape:
            raise ValueError(f"metric shape {g.shape} does not match grid")
        asym = np.max(np.abs(g - np.swapaxes(g, 0, 1)))
        if asym > 1e-12:
            raise ValueError(f"metric not symmetric (defect {asym:.3e})")
        self.grid = grid
        self.g = 0.5 * (g + np.swapaxes(g, 0, 1))  # exact symmetry by storage

        gm = np.moveaxis(self.g, (0, 1), (-2, -1))
        eig = np.linalg.eigvalsh(gm)
        self.min_eigenvalue = float(eig.min())
        if self.min_eigenvalue <= 0:
            raise SingularMetricError(
                f"metric not positive definite (min eigenvalue {self.min_eigenvalue:.3e})"
            )
        self.inv = np.moveaxis(np.linalg.inv(gm), (-2, -1), (0, 1))
        self.sqrt_det = np.sqrt(np.linalg.det(gm))
        self.christoffel = self._christoffel()

    @classmethod
    def identity(cls, grid: Grid) -> "MetricField":
        g = np.zeros((grid.d, grid.d) + grid.shape)
        for a in range(grid.d):
            g[a, a] = 1.0
        return cls(grid, g)

    @classmethod
    def from_h(cls, grid: Grid, h: np.ndarray) -> "MetricField":
        g = np.array(h, dtype=float)
        for a in range(grid.d):
            g[a, a] += 1.0
        return cls(grid, g)

    @property
    def h(self) -> np.ndarray:
        h = self.g.copy()
        for a in range(self.grid.d):
            h[a, a] -= 1.0
        return h

    def _christoffel(self) -> np.ndarray:
        """Gamma^c_{ab} = 1/2 g^{cs} (d_b g_{as} + d_a g_{bs} - d_s g_{ab})."""
        dg = sp.gradient(self.grid, self.g).real  # dg[s, a, b] = d_s g_{ab}
        low = 0.5 * (
            np.einsum("bas...->sab...", dg)
            + np.einsum("abs...->sab...", dg)
            - np.einsum("sab...->sab...", dg)
        )  # low[s, a, b] = Gamma_{s,ab}
        return np.einsum("cs...,sab...->cab...", self.inv, low)

    def laplace_beltrami(self, f: np.ndarray) -> np.ndarray:
        """Delta_g f for a scalar f: g^{ab}(d2_ab f - Gamma^c_ab d_c f)."""
        df = sp.gradient(self.grid, f)
        d2f = np.stack([sp.gradient(self.grid, df[a]) for a in range(self.grid.d)])
        out = np.einsum("ab...,ab...->...", self.inv.astype(d2f.dtype), d2f)
        out -= np.einsum(
            "ab...,cab...,c...->...",
            self.inv.astype(df.dtype),
            self.christoffel.astype(df.dtype),
            df,
        )
        return out

    def harmonic_defect(self) -> np.ndarray:
        """g^{ab} Gamma^c_{ab}; identically zero in harmonic coordinates."""
        return np.einsum("ab...,cab...->c...", self.inv, self.christoffel)

    def volume_integral(self, f: np.ndarray) -> float:
        return float(np.sum(f * self.sqrt_det) * self.grid.cell_volume)


def covariant_derivative(grid, T, nup, nlow, metric=None, A=None):
    """Covariant derivative, optionally gauged: nabla^A_c T = nabla_c T + i A_c T.

    The new lower (derivative) index is inserted at position ``nup``,
    so the result is again laid out uppers-first.  ``metric=None``
    means the flat connection (plain gradient).
    """
    T = np.asarray(T)
    if T.ndim != nup + nlow + grid.d:
        raise ValueError(
            f"tensor rank mismatch: ndim {T.ndim} vs {nup} upper + {nlow} lower indices"
        )
    out = sp.gradient(grid, T)  # derivative index leading
    if metric is not None:
        Gam = metric.christoffel.astype(out.dtype)
        for i in range(nup):
            Tm = np.moveaxis(T, i, 0)
            term = np.einsum("ags...,s...->ga...", Gam, Tm)
            out += np.moveaxis(term, 1, i + 1)
        for j in range(nlow):
            Tm = np.moveaxis(T, nup + j, 0)
            term = np.einsum("sgb...,s...->gb...", Gam, Tm)
            out -= np.moveaxis(term, 1, nup + j + 1)
    if A is not None:
        A_exp = A.reshape((grid.d,) + (1,) * (nup + nlow) + grid.shape)
        out = out + 1j * A_exp * T[np.newaxis]
    return np.moveaxis(out, 0, nup)


def curvature(metric: MetricField):
    """Riemann (all indices lowered, R_{abcs} = g_{ma} R^m_{bcs}) and Ricci.

    R^s_{gab} = d_a Gamma^s_{bg} - d_b Gamma^s_{ag}
                + Gamma^m_{bg} Gamma^s_{am} - Gamma^m_{ag} Gamma^s_{bm};
    Ric_{gb} = R^s_{gsb}.
    """
    grid = metric.grid
    Gam = metric.christoffel
    dGam = sp.gradient(grid, Gam).real  # dGam[m, c, a, b] = d_m Gamma^c_{ab}
    riem_up = (
        np.einsum("asbg...->sgab...", dGam)
        - np.einsum("bsag...->sgab...", dGam)
        + np.einsum("mbg...,sam...->sgab...", Gam, Gam)
        - np.einsum("mag...,sbm...->sgab...", Gam, Gam)
    )
    riemann = np.einsum("ms...,mgab...->sgab...", metric.g, riem_up)
    ricci = np.einsum("sgsb...->gb...", riem_up)
    return riemann, ricci


def _apply_metric_all(T, upper_axes, lower_axes, metric):
    """Raise/lower every index of T so a flat dot with conj(T) gives |T|^2_g."""
    M = T.astype(complex)
    for ax in upper_axes:
        M = np.moveaxis(
            np.einsum("ab...,b...->a...", metric.g.astype(M.dtype), np.moveaxis(M, ax, 0)),
            0,
            ax,
        )
    for ax in lower_axes:
        M = np.moveaxis(
            np.einsum("ab...,b...->a...", metric.inv.astype(M.dtype), np.moveaxis(M, ax, 0)),
            0,
            ax,
        )
    return M


def tensor_norm_sq_field(grid, T, nup, nlow, metric=None):
    """Pointwise |T|^2_g (flat contraction when metric is None)."""
    T = np.asarray(T)
    ntens = nup + nlow
    if metric is None:
        M = T
    else:
        M = _apply_metric_all(T, list(range(nup)), list(range(nup, ntens)), metric)
    out = (M * np.conj(T)).real
    if ntens > 0:
        out = out.sum(axis=tuple(range(ntens)))
    return out


def intrinsic_norm(grid, T, nup, nlow, metric=None, A=None, k=0):
    """Intrinsic Sobolev norm: sqrt(sum_{l<=k} int |nabla^{A,l} T|^2_g dmu).

    Derivative indices count as lower indices; dmu = sqrt(det g) dx.
    Negative k is out of scope (the duality definition is test-only).
    """
    if k < 0:
        raise ValueError("negative intrinsic norms are not a runtime operation")
    if metric is None:
        metric_for_int = None
        sqrt_det = 1.0
    else:
        metric_for_int = metric
        sqrt_det = metric.sqrt_det
    total = 0.0
    cur, up, low = np.asarray(T), nup, nlow
    for level in range(k + 1):
        dens = tensor_norm_sq_field(grid, cur, up, low, metric_for_int)
        total += float(np.sum(dens * sqrt_det) * grid.cell_volume)
        if level < k:
            cur = covariant_derivative(grid, cur, up, low, metric_for_int, A)
            low += 1
    return float(np.sqrt(total))


def flat_sobolev_norm(grid, T, k):
    """Flat counterpart of the intrinsic norm: sqrt(sum_{l<=k} ||d^l T||^2_{L2}).

    Computed Fourier-side with the weight sum_{l<=k} |xi|^{2l}; this is
    the norm the intrinsic one degenerates to at g=I, A=0.
    """
    fh = grid.fft(np.asarray(T))
    k2 = grid.k_squared()
    w = np.zeros_like(k2)
    p = np.ones_like(k2)
    for _ in range(k + 1):
        w += p
        p = p * k2
    total = np.sum(w * (fh * np.conj(fh)).real)
    return float(np.sqrt(total * grid.cell_volume / grid.n**grid.d))


def energy(grid, psi, metric, A, k):
    """Energy functional of order k: the squared intrinsic Sobolev norm of psi."""
    return intrinsic_norm(grid, psi, 0, 0, metric, A, k) ** 2


@dataclass(frozen=True)
class Residual:
    l2: float
    linf: float


_CONSTRAINT_NAMES = (
    "gauss",
    "codazzi",
    "divergence",
    "curl_a",
    "coulomb",
    "harmonic",
    "symmetry",
    "trace",
)


@dataclass(frozen=True)
class ConstraintReport:
    """Residual norms of the eight compatibility conditions.

    Residual fields are mean-projected before taking norms: the torus
    zero mode is obstructed for the elliptic solves, and the discarded
    constants are reported separately in ``nondecay``.
    """

    gauss: Residual
    codazzi: Residual
    divergence: Residual
    curl_a: Residual
    coulomb: Residual
    harmonic: Residual
    symmetry: Residual
    trace: Residual
    nondecay: dict

    def as_dict(self):
        return {name: getattr(self, name) for name in _CONSTRAINT_NAMES}

    def max_l2(self) -> float:
        return max(r.l2 for r in self.as_dict().values())

    def max_linf(self) -> float:
        return max(r.linf for r in self.as_dict().values())


def _residual_norms(grid, field, mean_project=True):
    mean = sp.field_mean(grid, field)
    size = float(np.sqrt(np.sum(np.abs(np.atleast_1d(mean)) ** 2)))
    if mean_project:
        field = field - mean[(...,) + (np.newaxis,) * grid.d]
    return Residual(sp.l2_norm(grid, field), sp.linf_norm(grid, field)), size


def gauss_bilinear(lam):
    """The second-fundamental-form side of the Gauss equation.

    Returns the array G[s, g, a, b] = Re(lam_{bg} conj(lam_{as})
    - lam_{ag} conj(lam_{bs})), to be compared with the lowered Riemann
    tensor indexed R_{sgab}.
    """
    return (
        np.einsum("bg...,as...->sgab...", lam, np.conj(lam))
        - np.einsum("ag...,bs...->sgab...", lam, np.conj(lam))
    ).real


def constraint_residuals(grid, psi, metric, lam, A, mean_project=True):
    """Evaluate each compatibility condition literally and report norms.

    Takes psi (complex scalar mean curvature), the metric, the complex
    second fundamental form lam (both indices lower), and the
    connection covector A.
    """
    nondecay = {}

    riemann, _ = curvature(metric)
    # Riemann lowered is R_{abcs} with first index lowered from R^m_{bcs};
    # the Gauss equation pairs it as R_{sgab}.
    r_gauss = np.einsum("sgab...->sgab...", riemann) - gauss_bilinear(lam)

    dlam = covariant_derivative(grid, lam, 0, 2, metric, A)  # index order (c, a, b)
    r_codazzi = dlam - np.einsum("acb...->cab...", dlam)
    div_lam = np.einsum("ca...,cab...->b...", metric.inv.astype(dlam.dtype), dlam)
    dpsi_gauged = covariant_derivative(grid, psi, 0, 0, metric, A)
    r_div = div_lam - dpsi_gauged

    dA = covariant_derivative(grid, A, 0, 1, metric)  # (c, a) = nabla_c A_a
    curl_source = np.einsum(
        "gc...,ca...,bg...->ab...",
        metric.inv.astype(lam.dtype),
        lam,
        np.conj(lam),
    ).imag
    r_curl = (dA - np.einsum("ac...->ca...", dA)) - curl_source

    r_coulomb = np.einsum("ab...,ab...->...", metric.inv, dA)
    r_harmonic = metric.harmonic_defect()
    r_symm = lam - np.einsum("ba...->ab...", lam)
    r_trace = np.einsum("ab...,ab...->...", metric.inv.astype(lam.dtype), lam) - psi

    results = {}
    for name, field in (
        ("gauss", r_gauss),
        ("codazzi", r_codazzi),
        ("divergence", r_div),
        ("curl_a", r_curl),
        ("coulomb", r_coulomb),
        ("harmonic", r_harmonic),
        ("symmetry", r_symm),
        ("trace", r_trace),
    ):
        res, mean_size = _residual_norms(grid, field, mean_project)
        results[name] = res
        nondecay[name] = mean_size
    return ConstraintReport(nondecay=nondecay, **results)


def trig_interp(grid, f, points, chunk=4096):
    """Evaluate the trigonometric interpolant of f at arbitrary points.

    ``points`` has shape (d, m); leading tensor axes of f broadcast.
    Direct mode summation, chunked over points to bound memory.
    """
    f = np.asarray(f)
    fh = grid.fft(f) / grid.n**grid.d
    lead = f.shape[: f.ndim - grid.d]
    fh_flat = fh.reshape(lead + (-1,))
    K = grid.wavenumbers().reshape(grid.d, -1)
    m = points.shape[1]
    out = np.empty(lead + (m,), dtype=complex)
    for start in range(0, m, chunk):
        pts = points[:, start : start + chunk]
        phase = np.exp(1j * pts.T @ K)  # (chunk, modes)
        out[..., start : start + chunk] = np.einsum("pm,...m->...p", phase, fh_flat)
    return out


def harmonic_coordinate_fix(metric, tol=1e-10, max_iter=200, smallness=0.1):
    """Find y = x + phi(x) so the pulled-back metric is harmonic.

    Solves Delta_g phi^c = g^{ab} Gamma^c_{ab} by Picard iteration with
    the flat Laplacian as preconditioner (the coordinate functions
    y^c = x^c + phi^c are then g-harmonic), inverts the coordinate
    change on the grid, and returns (phi, pulled-back MetricField).
    """
    grid = metric.grid
    dh = sp.gradient(grid, metric.h).real
    if sp.l2_norm(grid, dh) > smallness * np.sqrt(grid.volume):
        raise ValueError("metric perturbation too large for the harmonic fix")

    rhs = metric.harmonic_defect()
    phi = np.zeros((grid.d,) + grid.shape)
    stall = 0
    last_update = np.inf
    for _ in range(max_iter):
        resid = np.stack([metric.laplace_beltrami(phi[c]).real for c in range(grid.d)])
        corr = sp.inverse_laplacian(grid, rhs - resid).real
        phi_new = phi + corr
        phi_new -= np.mean(phi_new, axis=grid.spatial_axes, keepdims=True)
        update = np.max(np.abs(phi_new - phi))
        phi = phi_new
        if update <= tol:
            break
        if update >= last_update:
            stall += 1
            if stall >= 10:
                raise NotContractingError(
                    "harmonic coordinate iteration stalled", residual=update
                )
        else:
            stall = 0
        last_update = update
    else:
        raise NotContractingError("harmonic coordinate iteration did not converge",
                                  residual=last_update)

    # Invert y = x + phi(x) on the grid: x(y) by fixed point with
    # trigonometric interpolation of phi.
    y = grid.coords().reshape(grid.d, -1)
    x = y.copy()
    for _ in range(50):
        phi_at_x = trig_interp(grid, phi, x).real
        x_new = y - phi_at_x
        shift = np.max(np.abs(x_new - x))
        x = x_new
        if shift <= 1e-13:
            break

    dphi = sp.gradient(grid, phi).real  # dphi[a, c] = d_a phi^c
    jac_flat = trig_interp(grid, dphi, x).real  # (a, c, m)
    m = x.shape[1]
    jac = np.zeros((m, grid.d, grid.d))
    for a in range(grid.d):
        for c in range(grid.d):
            jac[:, c, a] = jac_flat[a, c]  # J[c, a] = d y^c / d x^a
    for c in range(grid.d):
        jac[:, c, c] += 1.0
    inv_jac = np.linalg.inv(jac)  # (m, a, c): d x^a / d y^c

    g_at_x = trig_interp(grid, metric.g, x).real  # (a, b, m)
    g_new = np.einsum("mac,mbd,abm->cdm", inv_jac, inv_jac, g_at_x)
    g_new = g_new.reshape((grid.d, grid.d) + grid.shape)
    return phi, MetricField(grid, g_new)

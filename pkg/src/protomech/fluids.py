"""Periodic compressible isentropic fluid (1-D) and incompressible Euler (2-D).

Flat metric throughout: velocity equals the momentum covector, v = p. The
compressible state evolves in conservative variables (rho, sigma, rho p):

    rho_t   = -(rho v)'
    sigma_t = -(sigma v)'
    (rho p)_t = -(v rho p)' - P'
    P = rho (rho U_rho + sigma U_sigma)

Spatial derivatives are spectral; nonlinear fluxes are 2/3-rule dealiased.
"""

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from . import spectral


class CFLError(RuntimeError):
    pass


@dataclass(frozen=True)
class InternalEnergySpec:
    U: callable
    dU_drho: callable
    dU_dsigma: callable

    def consistency(self, rho, sigma, h=1e-6):
        """Max mismatch of the analytic partials against central differences."""
        rho = np.asarray(rho, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        fd_r = (self.U(rho + h, sigma) - self.U(rho - h, sigma)) / (2 * h)
        fd_s = (self.U(rho, sigma + h) - self.U(rho, sigma - h)) / (2 * h)
        return float(max(np.abs(fd_r - self.dU_drho(rho, sigma)).max(),
                         np.abs(fd_s - self.dU_dsigma(rho, sigma)).max()))


def _zeros(rho, sigma):
    return np.zeros(np.broadcast(np.asarray(rho), np.asarray(sigma)).shape)


def linear_energy(a=0.0, b=0.0, c=0.0):
    """U = a + b rho + c sigma."""
    return InternalEnergySpec(
        U=lambda r, s: a + b * np.asarray(r) + c * np.asarray(s),
        dU_drho=lambda r, s: b + _zeros(r, s),
        dU_dsigma=lambda r, s: c + _zeros(r, s),
    )


@dataclass(frozen=True)
class FluidState:
    rho: np.ndarray
    sigma: np.ndarray
    p: np.ndarray
    length: float = 2.0 * np.pi
    sqrt_g: float = 1.0
    time: float = 0.0

    def __post_init__(self):
        shapes = {np.shape(self.rho), np.shape(self.sigma), np.shape(self.p)}
        if len(shapes) != 1:
            raise ValueError("rho, sigma and p must share one shape")
        if np.any(np.asarray(self.rho) < 0):
            raise ValueError("rho must be nonnegative")

    @property
    def n(self):
        return np.size(self.rho)

    @property
    def dx(self):
        return self.length / self.n

    @property
    def x(self):
        return np.arange(self.n) * self.dx


def pressure(rho, sigma, U):
    rho = np.asarray(rho, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return rho * (rho * U.dU_drho(rho, sigma) + sigma * U.dU_dsigma(rho, sigma))


def _rates(rho, sigma, mom, U, length, g):
    d = lambda f: spectral.derivative(spectral.dealias(f), length)
    v = mom / rho
    rho_dot = -d(rho * v * g) / g
    sigma_dot = -d(sigma * v * g) / g
    mom_dot = -d(v * mom * g) / g - d(pressure(rho, sigma, U))
    return rho_dot, sigma_dot, mom_dot


def compressible_rhs(state, U):
    """(rho_t, sigma_t, (rho p)_t) for the isentropic fluid."""
    rho = np.asarray(state.rho, dtype=float)
    return _rates(rho, np.asarray(state.sigma, dtype=float), rho * state.p, U, state.length, state.sqrt_g)


def step_fluid(state, U, dt):
    """One rk4 step; raises CFLError if dt > 0.5 dx / max|v|."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    vmax = float(np.abs(state.p).max())
    if vmax > 0 and dt > 0.5 * state.dx / vmax:
        raise CFLError(f"dt={dt} exceeds CFL limit {0.5 * state.dx / vmax:.3e}")
    rho = np.asarray(state.rho, dtype=float)
    y = (rho, np.asarray(state.sigma, dtype=float), rho * state.p)

    def f(y):
        return _rates(*y, U, state.length, state.sqrt_g)

    k1 = f(y)
    k2 = f(tuple(a + 0.5 * dt * b for a, b in zip(y, k1)))
    k3 = f(tuple(a + 0.5 * dt * b for a, b in zip(y, k2)))
    k4 = f(tuple(a + dt * b for a, b in zip(y, k3)))
    rho, sigma, mom = (a + dt / 6.0 * (b + 2 * c + 2 * d + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4))
    if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(sigma)) and np.all(np.isfinite(mom))):
        raise FloatingPointError("non-finite fluid state")
    if np.any(rho <= 0):
        raise FloatingPointError("density became nonpositive")
    return replace(state, rho=rho, sigma=sigma, p=mom / rho, time=state.time + dt)


def fluid_diagnostics(state, U):
    """Mass, entropy, momentum and total energy of a 1-D state."""
    dx, rho, sigma, p = state.dx, state.rho, state.sigma, state.p
    return {
        "mass": float(np.sum(rho) * dx),
        "entropy": float(np.sum(sigma) * dx),
        "momentum": float(np.sum(rho * p) * dx),
        "energy": float(np.sum(0.5 * rho * p**2 + rho * U.U(rho, sigma)) * dx),
    }


@dataclass(frozen=True)
class VelocityField2D:
    ux: np.ndarray
    uy: np.ndarray
    grid: spectral.Grid2D
    time: float = 0.0

    def divergence(self):
        return self.grid.ddx(self.ux) + self.grid.ddy(self.uy)

    def vorticity(self):
        return self.grid.ddx(self.uy) - self.grid.ddy(self.ux)


def project_divfree(u):
    """Subtract the gradient of theta, where lap(theta) = div(u), zero-mean theta."""
    g = u.grid
    uxh = np.fft.fft2(u.ux)
    uyh = np.fft.fft2(u.uy)
    div = 1j * g.kxd * uxh + 1j * g.kyd * uyh
    k2 = g.kxd**2 + g.kyd**2
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(k2 > 0, -div / k2, 0.0)
    ux = np.fft.ifft2(uxh - 1j * g.kxd * theta).real
    uy = np.fft.ifft2(uyh - 1j * g.kyd * theta).real
    return replace(u, ux=ux, uy=uy)


def euler_rhs(u, tol=1e-8):
    """-P(u . grad u); rejects inputs with max|div u| > tol."""
    div = float(np.abs(u.divergence()).max())
    if div > tol:
        raise ValueError(f"velocity is not divergence-free (max |div u| = {div:.3e})")
    g = u.grid
    ax = g.dealias(u.ux * g.ddx(u.ux) + u.uy * g.ddy(u.ux))
    ay = g.dealias(u.ux * g.ddx(u.uy) + u.uy * g.ddy(u.uy))
    proj = project_divfree(replace(u, ux=ax, uy=ay))
    return replace(u, ux=-proj.ux, uy=-proj.uy)


def step_euler2d(u, dt):
    def f(v):
        r = euler_rhs(v)
        return r.ux, r.uy

    def shifted(k, a):
        return replace(u, ux=u.ux + a * k[0], uy=u.uy + a * k[1])

    k1 = f(u)
    k2 = f(shifted(k1, 0.5 * dt))
    k3 = f(shifted(k2, 0.5 * dt))
    k4 = f(shifted(k3, dt))
    ux = u.ux + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    uy = u.uy + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    if not (np.all(np.isfinite(ux)) and np.all(np.isfinite(uy))):
        raise FloatingPointError("non-finite velocity")
    return replace(u, ux=ux, uy=uy, time=u.time + dt)


def euler2d_diagnostics(u):
    g = u.grid
    w = u.vorticity()
    return {
        "energy": 0.5 * g.integrate(u.ux**2 + u.uy**2),
        "enstrophy": 0.5 * g.integrate(w**2),
        "momentum_x": g.integrate(u.ux),
        "momentum_y": g.integrate(u.uy),
    }


def taylor_green(grid):
    return VelocityField2D(np.sin(grid.x) * np.cos(grid.y), -np.cos(grid.x) * np.sin(grid.y), grid)


def diagnostics_csv(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time"] + list(columns))
    for t, d in rows:
        w.writerow([f"{t:.17g}"] + [f"{d[c]:.17g}" for c in columns])
    return buf.getvalue()


def snapshot_csv_1d(state):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "rho", "sigma", "p"])
    for row in zip(state.x, state.rho, state.sigma, state.p):
        w.writerow([f"{v:.17g}" for v in row])
    return buf.getvalue()


def snapshot_csv_2d(u):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "ux", "uy"])
    for row in zip(u.grid.x.ravel(), u.grid.y.ravel(), u.ux.ravel(), u.uy.ravel()):
        w.writerow([f"{v:.17g}" for v in row])
    return buf.getvalue()

"""Phase (synchronicity) and emergence-density transport on a periodic line.

The state is carried by Lagrangian markers. Each marker follows Hamilton's
equations and accumulates phase at the rate L / hbar, where L = v p - H.
Grid fields are a resampled view of the markers:

* ``S`` is the unwrapped phase, ``S(x + length) = S(x) + winding``;
* ``rho`` holds point values of the emergence density, rebuilt from the
  cumulative-mass labels the markers carry by spectral differentiation, so
  total mass is conserved to round-off and markers that sit on the grid
  reproduce the initial field.
"""

import csv
import io
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from . import spectral

TWO_PI = 2.0 * np.pi


class CausticError(RuntimeError):
    """Characteristics crossed: marker order is no longer monotone."""


def _fd(fun, x, p, t, wrt, h=1e-6):
    if wrt == "p":
        s = h * (1.0 + np.abs(p))
        return (fun(x, p + s, t) - fun(x, p - s, t)) / (2 * s)
    s = h * (1.0 + np.abs(x))
    return (fun(x + s, p, t) - fun(x - s, p, t)) / (2 * s)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Hamiltonian H(x, p) on the cotangent bundle of the line.

    Callables take ``(x, p)``, or ``(x, p, t)`` when ``time_dependent`` is set,
    and must broadcast over numpy arrays. Missing derivatives fall back to
    central differences.
    """

    H: callable
    dH_dp: callable = None
    dH_dx: callable = None
    time_dependent: bool = False

    def _call(self, f, x, p, t):
        return f(x, p, t) if self.time_dependent else f(x, p)

    def value(self, x, p, t=0.0):
        return np.asarray(self._call(self.H, x, p, t), dtype=float) + 0.0 * np.asarray(x)

    def dp(self, x, p, t=0.0):
        if self.dH_dp is None:
            return _fd(lambda a, b, c: self.value(a, b, c), x, p, t, "p")
        return np.asarray(self._call(self.dH_dp, x, p, t), dtype=float) + 0.0 * np.asarray(x)

    def dx(self, x, p, t=0.0):
        if self.dH_dx is None:
            return _fd(lambda a, b, c: self.value(a, b, c), x, p, t, "x")
        return np.asarray(self._call(self.dH_dx, x, p, t), dtype=float) + 0.0 * np.asarray(x)


def kinetic(mass=1.0, potential=None, dpotential=None):
    """H = p^2 / 2m + V(x)."""
    if potential is None:
        return HamiltonianSpec(
            H=lambda x, p: p**2 / (2 * mass),
            dH_dp=lambda x, p: p / mass,
            dH_dx=lambda x, p: np.zeros_like(np.asarray(x, dtype=float)),
        )
    return HamiltonianSpec(
        H=lambda x, p: p**2 / (2 * mass) + potential(x),
        dH_dp=lambda x, p: p / mass,
        dH_dx=None if dpotential is None else (lambda x, p: dpotential(x)),
    )


def harmonic(omega=1.0, mass=1.0):
    return kinetic(mass, lambda x: 0.5 * mass * omega**2 * x**2, lambda x: mass * omega**2 * x)


def relativistic(mass=1.0, c=1.0):
    """H = c sqrt(p^2 + m^2 c^2)."""
    return HamiltonianSpec(
        H=lambda x, p: c * np.sqrt(p**2 + (mass * c) ** 2),
        dH_dp=lambda x, p: c * p / np.sqrt(p**2 + (mass * c) ** 2),
        dH_dx=lambda x, p: np.zeros_like(np.asarray(x, dtype=float)),
    )


@dataclass(frozen=True)
class Markers:
    """Characteristic markers, ordered by their cumulative-mass label."""

    x: np.ndarray
    p: np.ndarray
    S: np.ndarray  # accumulated phase
    weight: np.ndarray
    label: np.ndarray  # cumulative mass at the marker, label[0] = 0


@dataclass(frozen=True)
class ProtoState:
    n: int
    length: float
    S: np.ndarray
    rho: np.ndarray
    markers: Markers
    hbar: float = 1.0
    time: float = 0.0
    x0: float = 0.0
    winding: float = 0.0

    @property
    def x(self):
        return self.x0 + np.arange(self.n) * self.dx

    @property
    def dx(self):
        return self.length / self.n

    @classmethod
    def from_fields(cls, S, rho, length=TWO_PI, x0=0.0, hbar=1.0, winding=None, time=0.0):
        """Build a state from grid phase and density; rho is normalized to unit mass.

        ``winding`` is the phase gained over one period; when omitted it is
        inferred from the samples and rounded to a multiple of 2 pi.
        """
        S = np.array(S, dtype=float)
        rho = np.array(rho, dtype=float)
        n = S.size
        if n < 8:
            raise ValueError("grid size must be at least 8")
        if rho.shape != S.shape:
            raise ValueError("S and rho must have the same shape")
        if hbar <= 0:
            raise ValueError("hbar must be positive")
        if np.any(rho < 0):
            raise ValueError("rho must be nonnegative")
        dx = length / n
        mass = rho.sum() * dx
        if mass <= 0:
            raise ValueError("rho has zero mass")
        rho = rho / mass
        if winding is None:
            winding = TWO_PI * np.round((2 * S[-1] - S[-2] - S[0]) / TWO_PI)
        x = x0 + np.arange(n) * dx
        p = _momentum(S, winding, length, x0, x, hbar)
        cum = spectral.antiderivative(rho, length)
        weight = np.diff(np.append(cum, 1.0))
        markers = Markers(x=x.copy(), p=p, S=S.copy(), weight=weight, label=cum)
        return cls(n, float(length), S, rho, markers, float(hbar), float(time), float(x0), float(winding))


def _momentum(S, winding, length, x0, x, hbar):
    periodic = S - winding * (x - x0) / length
    return hbar * (winding / length + spectral.derivative(periodic, length))


def momentum_of(state):
    """p = hbar dS/dx, the momentum of the phase field."""
    return _momentum(state.S, state.winding, state.length, state.x0, state.x, state.hbar)


def velocity_of(h, state):
    return h.dp(state.x, momentum_of(state), state.time)


def lagrangian_of(h, state):
    p = momentum_of(state)
    v = h.dp(state.x, p, state.time)
    return v * p - h.value(state.x, p, state.time)


def _marker_rates(h, x, p, t, hbar):
    v = h.dp(x, p, t)
    return v, -h.dx(x, p, t), (v * p - h.value(x, p, t)) / hbar


def advance_markers(markers, h, dt, hbar=1.0, t=0.0):
    """One rk4 step of the characteristic ODEs for every marker."""
    x, p, s = markers.x, markers.p, markers.S
    k1 = _marker_rates(h, x, p, t, hbar)
    k2 = _marker_rates(h, x + 0.5 * dt * k1[0], p + 0.5 * dt * k1[1], t + 0.5 * dt, hbar)
    k3 = _marker_rates(h, x + 0.5 * dt * k2[0], p + 0.5 * dt * k2[1], t + 0.5 * dt, hbar)
    k4 = _marker_rates(h, x + dt * k3[0], p + dt * k3[1], t + dt, hbar)
    new = [
        y + dt / 6.0 * (a + 2 * b + 2 * c + d)
        for y, a, b, c, d in zip((x, p, s), k1, k2, k3, k4)
    ]
    if not all(np.all(np.isfinite(a)) for a in new):
        raise FloatingPointError("non-finite marker state")
    return replace(markers, x=new[0], p=new[1], S=new[2])


def check_monotone(markers, length):
    x = markers.x
    if np.any(np.diff(x) <= 0) or x[-1] >= x[0] + length:
        bad = int(np.argmin(np.append(np.diff(x), x[0] + length - x[-1])))
        raise CausticError(f"characteristics crossed near marker {bad}")


def resample(markers, n, length, x0, winding):
    """Grid phase and density from monotone markers."""
    shift = np.floor((markers.x[0] - x0) / length)
    xm = markers.x - shift * length
    sm = markers.S - shift * winding
    xs = np.append(xm, xm[0] + length)
    yp = sm - winding * xm / length
    ym = markers.label - xm / length
    phase = CubicSpline(xs, np.append(yp, yp[0]), bc_type="periodic", extrapolate="periodic")
    cum = CubicSpline(xs, np.append(ym, ym[0]), bc_type="periodic", extrapolate="periodic")
    dx = length / n
    xg = x0 + np.arange(n) * dx
    S = phase(xg) + winding * xg / length
    # point values from the spectral derivative of the cumulative mass; the
    # derivative of a periodic field has zero mean, so total mass stays 1
    rho = 1.0 / length + spectral.derivative(cum(xg), length)
    return S, rho


def step_proto(state, h, dt):
    """Advance markers by ``dt`` and resample the grid fields.

    Raises CausticError when markers cross.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    markers = advance_markers(state.markers, h, dt, state.hbar, state.time)
    check_monotone(markers, state.length)
    S, rho = resample(markers, state.n, state.length, state.x0, state.winding)
    return replace(state, S=S, rho=rho, markers=markers, time=state.time + dt)


def run_proto(state, h, dt, n_steps, resample_grid=True):
    """List of states after 0..n_steps steps.

    With ``resample_grid=False`` only the markers advance (no caustic check);
    grid fields keep their initial values. This is the mode for long runs
    through focal points, where only marker diagnostics are meaningful.
    """
    history = [state]
    for _ in range(n_steps):
        if resample_grid:
            state = step_proto(state, h, dt)
        else:
            markers = advance_markers(state.markers, h, dt, state.hbar, state.time)
            state = replace(state, markers=markers, time=state.time + dt)
        history.append(state)
    return history


def energy_drift(history, h):
    """Max over markers and steps of |H(x_t, p_t) - H(x_0, p_0)|."""
    m0 = history[0].markers
    e0 = h.value(m0.x, m0.p, history[0].time)
    return max(float(np.abs(h.value(s.markers.x, s.markers.p, s.time) - e0).max()) for s in history)


@dataclass(frozen=True)
class ShadowSpec:
    """Phase R*(x, t) of the external-time section, optionally with its t-rate."""

    R_star: callable
    R_star_t: callable = None

    def rate(self, x, t, h=1e-5):
        if self.R_star_t is not None:
            return np.asarray(self.R_star_t(x, t), dtype=float) + 0.0 * np.asarray(x)
        return (np.asarray(self.R_star(x, t + h)) - np.asarray(self.R_star(x, t - h))) / (2 * h)


@dataclass(frozen=True)
class ShadowFields:
    R: np.ndarray  # R* - S
    p_shadow: np.ndarray
    T: np.ndarray
    f: np.ndarray


def shadow_fields(state, shadow, h):
    """Shadow phase, its momentum, T and the emergence frequency on the grid.

    f = -(1/2pi) dR/dt with R = R* - S; the phase rate of S comes from the
    Lagrangian, dS/dt = L/hbar - v dS/dx.
    """
    x, t, hbar = state.x, state.time, state.hbar
    p = momentum_of(state)
    v = h.dp(x, p, t)
    s_rate = phase_rate(state, h)
    r_star = np.asarray(shadow.R_star(x, t), dtype=float) + 0.0 * x
    R = r_star - state.S
    p_shadow = hbar * _phase_derivative(R, state.length)
    f = -(shadow.rate(x, t) - s_rate) / TWO_PI
    T = v * p_shadow - TWO_PI * hbar * f
    return ShadowFields(R=R, p_shadow=p_shadow, T=T, f=f)


def phase_rate(state, h):
    """Grid rate of the phase, dS/dt = L/hbar - v dS/dx."""
    x, t, hbar = state.x, state.time, state.hbar
    p = momentum_of(state)
    v = h.dp(x, p, t)
    lag = v * p - h.value(x, p, t)
    return lag / hbar - v * p / hbar


def coincident_shadow(state, h):
    """Shadow whose external phase is the state's own phase (grid evaluation only)."""
    return ShadowSpec(lambda x, t: state.S, lambda x, t: phase_rate(state, h))


def _phase_derivative(phase, length):
    # the phase may wind by a multiple of 2 pi per period
    w = TWO_PI * np.round((2 * phase[-1] - phase[-2] - phase[0]) / TWO_PI)
    ramp = w * np.arange(phase.size) / phase.size
    return w / length + spectral.derivative(phase - ramp, length)


def shadow_frequency(state, shadow, h):
    return shadow_fields(state, shadow, h).f


def marker_frequency(state, shadow, h):
    """Emergence frequency evaluated at the marker positions."""
    m = state.markers
    s_rate = -h.value(m.x, m.p, state.time) / state.hbar
    return -(shadow.rate(m.x, state.time) - s_rate) / TWO_PI


def frequency_drift(history, shadow, h):
    """Max over markers and steps of |f(x_t, t) - f(x_0, 0)|."""
    f0 = marker_frequency(history[0], shadow, h)
    return max(float(np.abs(marker_frequency(s, shadow, h) - f0).max()) for s in history)


def emergence_times(times, R):
    """Times where R crosses a multiple of 2 pi, by linear interpolation."""
    times = np.asarray(times, dtype=float)
    R = np.asarray(R, dtype=float)
    events = []
    for i in range(len(R) - 1):
        a, b = R[i], R[i + 1]
        if a == b:
            continue
        lo, hi = min(a, b), max(a, b)
        if a < b:
            levels = np.arange(np.floor(a / TWO_PI) + 1, np.floor(b / TWO_PI) + 1)
        else:
            levels = np.arange(np.ceil(a / TWO_PI) - 1, np.ceil(b / TWO_PI) - 1, -1)
        for n in levels:
            level = n * TWO_PI
            if lo <= level <= hi:
                events.append(times[i] + (level - a) / (b - a) * (times[i + 1] - times[i]))
    return events


def detect_emergence(history, shadow):
    """(marker_id, time) pairs where R* - S_acc crosses 0 mod 2 pi, sorted by time."""
    times = np.array([s.time for s in history])
    R = np.array([np.asarray(shadow.R_star(s.markers.x, s.time)) - s.markers.S for s in history])
    out = []
    for mid in range(R.shape[1]):
        out.extend((mid, t) for t in emergence_times(times, R[:, mid]))
    out.sort(key=lambda e: (e[1], e[0]))
    return out


def _fd4(x, t):
    """Fourth-order finite-difference derivative on a uniform sample grid."""
    n = len(x)
    h = t[1] - t[0]
    d = np.empty(n)
    d[2:-2] = (x[:-4] - 8 * x[1:-3] + 8 * x[3:-1] - x[4:]) / (12 * h)
    c = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12 * h)
    c1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12 * h)
    d[0] = c @ x[:5]
    d[1] = c1 @ x[:5]
    d[-1] = -(c @ x[-5:][::-1])
    d[-2] = -(c1 @ x[-5:][::-1])
    return d


def action_along_path(lagrangian, t, x, hbar=1.0):
    """hbar^-1 times the integral of L(x, xdot) dt along a uniformly sampled path."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if len(t) < 3 or len(t) != len(x):
        raise ValueError("need at least three matching samples")
    if len(t) >= 5:
        xdot = _fd4(x, t)
    else:
        xdot = np.gradient(x, t, edge_order=2)
    return float(simpson(lagrangian(x, xdot), x=t) / hbar)


def theorem2_residual(state, h, sqrt_g=1.0):
    """Max discrepancy between the conservative Lie-Poisson form and the transport form.

    Conservative side: rho_t = -d(v rho) and
    (rho p)_t = -d(v rho p) - rho p dv + rho d(p v - H).
    Transport side: rho_t = -v drho - rho dv, p_t = hbar d(S_t) with
    S_t = L/hbar - v dS/dx, and (rho p)_t = rho_t p + rho p_t.
    """
    L, hbar = state.length, state.hbar
    d = lambda f: spectral.derivative(f, L)
    x, t = state.x, state.time
    rho = state.rho
    p = momentum_of(state)
    v = h.dp(x, p, t)
    H = h.value(x, p, t)
    g = np.broadcast_to(np.asarray(sqrt_g, dtype=float), rho.shape)
    rho_a = -d(v * rho * g) / g
    mom_a = -d(v * rho * p * g) / g - rho * p * d(v) + rho * d(p * v - H)
    lag = v * p - H
    s_rate = lag / hbar - v * p / hbar
    p_rate = hbar * d(s_rate)
    rho_b = -v * d(rho) - rho * d(v)
    mom_b = rho_b * p + rho * p_rate
    return float(max(np.abs(rho_a - rho_b).max(), np.abs(mom_a - mom_b).max()))


def snapshot_csv(state, h):
    p = momentum_of(state)
    v = h.dp(state.x, p, state.time)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "S", "rho", "p", "v"])
    for row in zip(state.x, state.S, state.rho, p, v):
        w.writerow([f"{val:.17g}" for val in row])
    return buf.getvalue()


def events_csv(events):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["marker_id", "t_event"])
    for mid, t in events:
        w.writerow([mid, f"{t:.17g}"])
    return buf.getvalue()

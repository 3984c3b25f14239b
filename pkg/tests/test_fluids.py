import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import curve_fit

from protomech import fluids, spectral
from protomech.checks import richardson_slope

TWO_PI = 2 * np.pi


def grid(n):
    return np.arange(n) * TWO_PI / n


def smooth_state(n=256):
    x = grid(n)
    return fluids.FluidState(1 + 0.2 * np.sin(x), 0.5 + 0.1 * np.cos(2 * x), 0.1 * np.cos(x))


# pressure law


def test_pressure_substitution_cases():
    assert fluids.pressure(2.0, 1.0, fluids.linear_energy(a=3.0)) == 0.0
    assert fluids.pressure(2.0, 1.0, fluids.linear_energy(b=1.0)) == 4.0
    assert fluids.pressure(2.0, 3.0, fluids.linear_energy(c=1.0)) == 6.0


@pytest.mark.parametrize("U,dU,d2U", [
    (lambda r: r**2, lambda r: 2 * r, lambda r: 2 + 0 * r),
    (lambda r: np.log(r), lambda r: 1 / r, lambda r: -1 / r**2),
    (lambda r: r**1.4 / 0.4, lambda r: 1.4 * r**0.4 / 0.4, lambda r: 1.4 * r**-0.6),
])
def test_pressure_first_law(U, dU, d2U):
    spec = fluids.InternalEnergySpec(lambda r, s: U(r), lambda r, s: dU(r), lambda r, s: 0 * r)
    assert spec.consistency(np.linspace(0.5, 3, 7), 0.0) <= 1e-6
    r = np.linspace(0.5, 3, 7)
    h = 1e-5
    dP = (fluids.pressure(r + h, 0, spec) - fluids.pressure(r - h, 0, spec)) / (2 * h)
    np.testing.assert_allclose(dP, 2 * r * dU(r) + r**2 * d2U(r), rtol=1e-8, atol=1e-10)


# rates


def test_uniform_rest_is_fixed_point():
    st_ = fluids.FluidState(np.full(32, 1.3), np.full(32, 0.2), np.zeros(32))
    for rate in fluids.compressible_rhs(st_, fluids.linear_energy(b=0.5, c=0.5)):
        assert np.abs(rate).max() <= 1e-15
    out = fluids.step_fluid(st_, fluids.linear_energy(b=0.5), 0.01)
    np.testing.assert_allclose(out.rho, st_.rho, atol=1e-15)


def test_uniform_translation():
    st_ = fluids.FluidState(np.full(32, 1.3), np.zeros(32), np.full(32, 0.4))
    rho_dot, _, mom_dot = fluids.compressible_rhs(st_, fluids.linear_energy())
    assert np.abs(rho_dot).max() <= 1e-15
    assert np.abs(mom_dot).max() <= 1e-15


def test_state_validation():
    with pytest.raises(ValueError):
        fluids.FluidState(np.ones(8), np.ones(9), np.ones(8))
    with pytest.raises(ValueError):
        fluids.FluidState(-np.ones(8), np.ones(8), np.ones(8))


def test_cfl_violation():
    st_ = fluids.FluidState(np.ones(32), np.zeros(32), np.full(32, 2.0))
    limit = 0.5 * (TWO_PI / 32) / 2.0
    fluids.step_fluid(st_, fluids.linear_energy(), 0.99 * limit)
    with pytest.raises(fluids.CFLError):
        fluids.step_fluid(st_, fluids.linear_energy(), 1.01 * limit)
    with pytest.raises(ValueError):
        fluids.step_fluid(st_, fluids.linear_energy(), -1.0)


def test_non_finite_rejected():
    st_ = fluids.FluidState(np.ones(16), np.zeros(16), np.zeros(16))
    bad = fluids.InternalEnergySpec(lambda r, s: r, lambda r, s: np.full_like(r, np.nan), lambda r, s: 0 * r)
    with pytest.raises(FloatingPointError):
        fluids.step_fluid(st_, bad, 0.01)


def test_sound_speed_dispersion_fit():
    # U = rho/2 gives P = rho^2/2, so c^2 = dP/drho = rho0
    rho0, eps, n = 2.0, 1e-4, 32
    x = grid(n)
    st_ = fluids.FluidState(rho0 + eps * np.cos(x), np.zeros(n), np.zeros(n))
    U = fluids.linear_energy(b=0.5)
    dt = 0.01
    period = TWO_PI / np.sqrt(rho0)
    steps = int(10 * period / dt)
    ts, amp = [0.0], [eps]
    for _ in range(steps):
        st_ = fluids.step_fluid(st_, U, dt)
        ts.append(st_.time)
        amp.append(2 * np.fft.rfft(st_.rho)[1].real / n)
    (a, w), _ = curve_fit(lambda t, a, w: a * np.cos(w * t), ts, amp, p0=(eps, 1.4))
    assert abs(w**2 - rho0) <= 1e-6


def test_conservation_1000_steps():
    U = fluids.linear_energy(b=0.5, c=0.5)
    st_ = smooth_state()
    d0 = fluids.fluid_diagnostics(st_, U)
    worst = dict.fromkeys(d0, 0.0)
    for _ in range(1000):
        st_ = fluids.step_fluid(st_, U, 1e-3)
        d = fluids.fluid_diagnostics(st_, U)
        for k in d:
            worst[k] = max(worst[k], abs(d[k] - d0[k]))
    assert worst["mass"] <= 1e-10
    assert worst["entropy"] <= 1e-10
    assert worst["momentum"] <= 1e-10
    assert worst["energy"] <= 1e-6


def test_nonlinear_energy_conservation():
    U = fluids.InternalEnergySpec(lambda r, s: r**2 / 3 + s * r, lambda r, s: 2 * r / 3 + s, lambda r, s: r)
    st_ = smooth_state(128)
    e0 = fluids.fluid_diagnostics(st_, U)["energy"]
    for _ in range(200):
        st_ = fluids.step_fluid(st_, U, 2e-3)
    assert abs(fluids.fluid_diagnostics(st_, U)["energy"] - e0) <= 1e-6


def test_fluid_self_convergence():
    def final(dt):
        x = grid(64)
        st_ = fluids.FluidState(1 + 0.2 * np.sin(x), np.zeros(64), 0.1 * np.cos(x))
        for _ in range(int(round(1 / dt))):
            st_ = fluids.step_fluid(st_, fluids.linear_energy(b=0.5), dt)
        return np.concatenate([st_.rho, st_.p])

    assert abs(richardson_slope(final(0.025), final(0.05), final(0.1)) - 4) <= 0.3


def test_diagnostics_csv_columns():
    U = fluids.linear_energy(b=0.5)
    st_ = smooth_state(16)
    text = fluids.diagnostics_csv([(0.0, fluids.fluid_diagnostics(st_, U))], ["mass", "entropy", "momentum", "energy"])
    assert text.splitlines()[0] == "time,mass,entropy,momentum,energy"
    assert fluids.snapshot_csv_1d(st_).splitlines()[0] == "x,rho,sigma,p"


# incompressible 2-D


@pytest.fixture(scope="module")
def g64():
    return spectral.Grid2D(64)


def random_field(g, seed):
    rng = np.random.default_rng(seed)
    ux = sum(rng.normal() * np.sin(a * g.x + b * g.y + rng.normal()) for a, b in [(1, 0), (0, 2), (1, 1), (2, -1)])
    uy = sum(rng.normal() * np.cos(a * g.x + b * g.y + rng.normal()) for a, b in [(1, 2), (3, 0), (1, -1)])
    return fluids.VelocityField2D(ux, uy, g)


def test_projection_leaves_solenoidal_field(g64):
    tg = fluids.taylor_green(g64)
    out = fluids.project_divfree(tg)
    assert max(np.abs(out.ux - tg.ux).max(), np.abs(out.uy - tg.uy).max()) <= 1e-13


def test_projection_kills_gradients(g64):
    theta = np.sin(g64.x) * np.cos(2 * g64.y) + np.cos(3 * g64.x)
    u = fluids.VelocityField2D(g64.ddx(theta), g64.ddy(theta), g64)
    out = fluids.project_divfree(u)
    assert max(np.abs(out.ux).max(), np.abs(out.uy).max()) <= 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31))
def test_projection_idempotent_and_divergence_free(seed):
    g = spectral.Grid2D(32)
    u = random_field(g, seed)
    p1 = fluids.project_divfree(u)
    p2 = fluids.project_divfree(p1)
    scale = 1 + np.abs(u.ux).max() + np.abs(u.uy).max()
    assert max(np.abs(p2.ux - p1.ux).max(), np.abs(p2.uy - p1.uy).max()) <= 1e-12 * scale
    assert np.abs(p1.divergence()).max() <= 1e-12 * scale


def test_projection_linear_and_self_adjoint(g64):
    u, w = random_field(g64, 1), random_field(g64, 2)
    pu, pw = fluids.project_divfree(u), fluids.project_divfree(w)
    inner = lambda a, b: g64.integrate(a.ux * b.ux + a.uy * b.uy)
    assert abs(inner(pu, w) - inner(u, pw)) <= 1e-12 * (1 + abs(inner(pu, w)))
    combo = fluids.VelocityField2D(2 * u.ux - w.ux, 2 * u.uy - w.uy, g64)
    pc = fluids.project_divfree(combo)
    assert np.abs(pc.ux - (2 * pu.ux - pw.ux)).max() <= 1e-12


def test_euler_rhs_examples(g64):
    zero = fluids.VelocityField2D(np.zeros_like(g64.x), np.zeros_like(g64.x), g64)
    assert not np.any(fluids.euler_rhs(zero).ux)
    const = fluids.VelocityField2D(np.full_like(g64.x, 0.3), np.full_like(g64.x, -1.0), g64)
    r = fluids.euler_rhs(const)
    assert max(np.abs(r.ux).max(), np.abs(r.uy).max()) <= 1e-14
    r = fluids.euler_rhs(fluids.taylor_green(g64))
    assert max(np.abs(r.ux).max(), np.abs(r.uy).max()) <= 1e-10


def test_euler_rejects_compressible_input(g64):
    u = fluids.VelocityField2D(np.sin(g64.x), np.zeros_like(g64.x), g64)
    with pytest.raises(ValueError, match="divergence"):
        fluids.euler_rhs(u)


def test_euler_invariants_1000_steps(g64):
    u = fluids.project_divfree(random_field(g64, 5))
    scale = max(np.abs(u.ux).max(), np.abs(u.uy).max())
    u = fluids.VelocityField2D(u.ux / scale, u.uy / scale, g64)
    d0 = fluids.euler2d_diagnostics(u)
    for _ in range(1000):
        u = fluids.step_euler2d(u, 1e-3)
    d = fluids.euler2d_diagnostics(u)
    assert abs(d["energy"] - d0["energy"]) <= 1e-6
    assert abs(d["enstrophy"] - d0["enstrophy"]) <= 1e-6
    assert abs(d["momentum_x"] - d0["momentum_x"]) <= 1e-10

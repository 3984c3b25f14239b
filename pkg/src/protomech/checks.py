"""Acceptance checks, grouped into suites and runnable from the CLI."""

import json
import math
import tempfile
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import algebra, fluids, functionals, lie_poisson, proto, spectral
from .scenario import ConfigError, parse_config, run_scenario


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _result(name, parts):
    """parts: list of (label, value, ok)."""
    ok = all(p[2] for p in parts)
    detail = "; ".join(f"{label}={value:.3g}" if isinstance(value, float) else f"{label}={value}" for label, value, _ in parts)
    return CheckResult(name, ok, detail)


def richardson_slope(fine, mid, coarse):
    """log2 of the ratio of successive self-convergence differences."""
    a = float(np.max(np.abs(coarse - mid)))
    b = float(np.max(np.abs(mid - fine)))
    return math.log2(a / b)


# 1 ---------------------------------------------------------------------


def check_rigid_body():
    sys = lie_poisson.rigid_body([1.0, 1.0, 2.0])
    start = time.perf_counter()
    traj = lie_poisson.run(sys, [1.0, 0.0, 1.0], 1e-3, 10_000)
    elapsed = time.perf_counter() - start
    rate = 1.0 * (1.0 / 1.0 - 1.0 / 2.0)
    t = traj.times
    exact = np.column_stack([np.cos(rate * t), np.sin(rate * t)])
    err = float(np.abs(traj.states[:, :2] - exact).max())
    e_drift = float(np.abs(traj.energy - traj.energy[0]).max())
    c_drift = float(np.abs(traj.casimirs - traj.casimirs[0]).max())
    return _result("1 rigid-body precession", [
        ("precession_err", err, err <= 1e-6),
        ("energy_drift", e_drift, e_drift <= 1e-8),
        ("casimir_drift", c_drift, c_drift <= 1e-8),
        ("runtime_s", elapsed, elapsed < 1.0),
    ])


# 2 ---------------------------------------------------------------------


def check_pairing_identity(seed=0):
    rng = np.random.default_rng(seed)
    so3 = algebra.AlgebraSpec.so3()
    grid = algebra.GridAlgebra(32, n_functions=1)
    worst_so3 = worst_grid = 0.0
    x = np.arange(32) * 2 * np.pi / 32
    for _ in range(100):
        xi, mu, zeta = rng.normal(size=(3, 3))
        lhs = so3.pairing(so3.ad_star(xi, mu), zeta)
        rhs = so3.pairing(mu, so3.bracket(xi, zeta))
        worst_so3 = max(worst_so3, abs(lhs - rhs))

        def smooth():
            a = rng.normal(size=(2, 4, 2))
            return np.array([sum(a[r, k, 0] * np.cos((k + 1) * x) + a[r, k, 1] * np.sin((k + 1) * x) for k in range(4))
                             for r in range(2)])

        xi, mu, zeta = smooth(), smooth(), smooth()
        lhs = grid.pairing(grid.ad_star(xi, mu), zeta)
        rhs = grid.pairing(mu, grid.bracket(xi, zeta))
        worst_grid = max(worst_grid, abs(lhs - rhs))
    return _result("2 ad* pairing identity", [
        ("so3_max", worst_so3, worst_so3 <= 1e-12),
        ("grid_max", worst_grid, worst_grid <= 1e-12),
    ])


# 3 ---------------------------------------------------------------------


def _wrapped(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def check_free_particle(k=3.0, n=128, dt=1e-3, n_steps=1000):
    x = np.arange(n) * 2 * np.pi / n
    state = proto.ProtoState.from_fields(k * x, np.ones(n), winding=2 * np.pi * k)
    h = proto.kinetic(1.0)
    start = time.perf_counter()
    history = proto.run_proto(state, h, dt, n_steps)
    elapsed = time.perf_counter() - start
    final = history[-1]
    t = final.time
    s_err = float(np.abs(_wrapped(final.S - (k * x - 0.5 * k * k * t))).max())
    rho_err = float(np.abs(final.rho - 1 / (2 * np.pi)).max())
    w_change = float(np.abs(final.markers.weight - state.markers.weight).max())
    mass_err = abs(float(np.sum(final.rho) * final.dx) - 1.0)
    drift = proto.energy_drift(history, h)
    return _result("3 free-particle phase transport", [
        ("S_err", s_err, s_err <= 1e-6),
        ("rho_err", rho_err, rho_err <= 1e-10),
        ("weight_change", w_change, w_change == 0.0),
        ("grid_mass_err", mass_err, mass_err <= 1e-10),
        ("energy_drift", drift, drift <= 1e-8),
        ("runtime_s", elapsed, elapsed < 5.0),
    ])


# 4 ---------------------------------------------------------------------

ROUNDOFF_FLOOR = 1e-12


def _t2(n, S, rho):
    x = np.arange(n) * 2 * np.pi / n
    state = proto.ProtoState.from_fields(S(x), rho(x), winding=0.0)
    return proto.theorem2_residual(state, proto.kinetic(1.0))


def check_conservative_form():
    h_prescribed = [_t2(n, np.sin, lambda x: 1 + 0.5 * np.cos(x)) for n in (64, 128, 256)]
    # a non-band-limited state shows the spectral decay itself
    h_broad = [_t2(n, lambda x: np.sin(x) + 0.3 * np.cos(2 * x), lambda x: np.exp(np.cos(x))) for n in (16, 32, 64)]
    floor_ok = all(b <= max(a, ROUNDOFF_FLOOR) for a, b in zip(h_prescribed, h_prescribed[1:]))
    broad_ok = all(b < a or b <= ROUNDOFF_FLOOR for a, b in zip(h_broad, h_broad[1:])) and h_broad[-1] <= 1e-8
    return _result("4 conservative vs transport form", [
        ("residual_N256", h_prescribed[-1], h_prescribed[-1] <= 1e-8),
        ("prescribed_N64/128/256", "/".join(f"{v:.1e}" for v in h_prescribed), floor_ok),
        ("broadband_N16/32/64", "/".join(f"{v:.1e}" for v in h_broad), broad_ok),
    ])


# 5 ---------------------------------------------------------------------


def check_emergence(k=2.0, f0=0.37, n=64, dt=1e-3, n_steps=200):
    x = np.arange(n) * 2 * np.pi / n
    h = proto.kinetic(1.0)
    state = proto.ProtoState.from_fields(k * x, 1 + 0.3 * np.cos(x), winding=2 * np.pi * k)

    def exact_S(xx, t):
        return k * np.asarray(xx) - 0.5 * k * k * t

    f_same = float(np.abs(proto.shadow_frequency(state, proto.coincident_shadow(state, h), h)).max())

    offset = proto.ShadowSpec(
        lambda xx, t: exact_S(xx, t) - 2 * np.pi * f0 * t,
        lambda xx, t: -0.5 * k * k - 2 * np.pi * f0 + 0.0 * np.asarray(xx),
    )
    history = proto.run_proto(state, h, dt, n_steps)
    f_grid = proto.shadow_frequency(history[-1], offset, h)
    f_const = float(np.abs(f_grid - f0).max())
    f_drift = proto.frequency_drift(history, offset, h)

    # events of R(t) = sin t + 6t against bracketed root finding
    R = lambda t: np.sin(t) + 6 * t
    ts = np.arange(0, 10 + 5e-5, 1e-4)
    found = proto.emergence_times(ts, R(ts))
    oracle = []
    for m in range(1, int(R(10.0) // (2 * np.pi)) + 1):
        level = 2 * np.pi * m
        oracle.append(brentq(lambda t: R(t) - level, 0.0, 10.0, xtol=1e-14))
    ev_err = float(np.max(np.abs(np.array(found) - np.array(oracle)))) if len(found) == len(oracle) else math.inf
    return _result("5 emergence frequency and events", [
        ("f_same_max", f_same, f_same == 0.0),
        ("f_offset_err", f_const, f_const <= 1e-10),
        ("f_transport_drift", f_drift, f_drift <= 1e-10),
        ("n_events", len(found), len(found) == len(oracle) > 0),
        ("event_err", ev_err, ev_err <= 1e-8),
    ])


# 6 ---------------------------------------------------------------------

CORPUS = ("p", "0.5 * p^2", "D1p^2", "p^3 + x * p", "p * D2p", "D1p^2 * p + D3p^2", "p^2 + D1p^2")


def check_variational(seed=0, n=64, hbar=0.7, probes=10):
    rng = np.random.default_rng(seed)
    x = np.arange(n) * 2 * np.pi / n
    rho = (1 + 0.5 * np.cos(x)) / (2 * np.pi)
    S = np.sin(x) + 0.2 * np.cos(2 * x)
    J = functionals.EmergenceMomentum(((0.6, S, rho), (0.4, 0.5 * np.cos(x), np.exp(np.sin(x)) / (2 * np.pi * 1.2660658777520082))),
                                      hbar=hbar)
    p = J.momenta()[0]
    gat = nl = 0.0
    orders = set()
    for text in CORPUS:
        F = functionals.parse_functional(text)
        orders.add(functionals.classify_order(F))
        X = functionals.variational_derivative(F, rho, p, hbar=hbar)
        for _ in range(probes):
            a = rng.normal(size=4)
            dp = a[0] + a[1] * np.sin(x + a[2]) + a[3] * np.cos(3 * x)
            g = functionals.gateaux_derivative(F, rho, p, dp, hbar=hbar)
            gat = max(gat, abs(g - float(np.sum(rho * dp * X)) * J.dx) / (1 + abs(g)))
        nl = max(nl, functionals.null_lagrangian_residual(F, J))

    def ratio(text):
        a, b = functionals.classical_limit_scaling(functionals.parse_functional(text), J, [hbar, hbar / 2])
        return a / b

    r1, r2 = ratio("D1p^2"), ratio("p^2 + D2p^2")
    return _result("6 variational derivative", [
        ("orders", "".join(map(str, sorted(orders))), {2, 3, 4} <= orders),
        ("gateaux_err", gat, gat <= 1e-6),
        ("null_lagrangian", nl, nl <= 1e-10),
        ("ratio_D1", abs(r1 - 4), abs(r1 - 4) <= 1e-10),
        ("ratio_D2", abs(r2 - 16), abs(r2 - 16) <= 1e-10),
    ])


# 7 ---------------------------------------------------------------------


def check_fluids():
    start = time.perf_counter()
    cases = [
        (fluids.linear_energy(a=3.0), 2.0, 1.0, 0.0),
        (fluids.linear_energy(b=1.0), 2.0, 1.0, 4.0),
        (fluids.linear_energy(c=1.0), 2.0, 3.0, 6.0),
    ]
    p_err = max(abs(float(fluids.pressure(r, s, U)) - want) for U, r, s, want in cases)

    n = 256
    x = np.arange(n) * 2 * np.pi / n
    U = fluids.linear_energy(b=0.5, c=0.5)
    st = fluids.FluidState(1 + 0.2 * np.sin(x), 0.5 + 0.1 * np.cos(2 * x), 0.1 * np.cos(x))
    d0 = fluids.fluid_diagnostics(st, U)
    worst = {key: 0.0 for key in d0}
    for _ in range(1000):
        st = fluids.step_fluid(st, U, 1e-3)
        d = fluids.fluid_diagnostics(st, U)
        for key in d:
            worst[key] = max(worst[key], abs(d[key] - d0[key]))

    g = spectral.Grid2D(64)
    tg = float(np.max([np.abs(c).max() for c in (lambda r: (r.ux, r.uy))(fluids.euler_rhs(fluids.taylor_green(g)))]))
    rng = np.random.default_rng(1)
    ux = sum(rng.normal() * np.sin(a * g.x + b * g.y + rng.normal()) for a, b in [(1, 0), (0, 2), (1, 1), (2, -1)])
    uy = sum(rng.normal() * np.cos(a * g.x + b * g.y + rng.normal()) for a, b in [(1, 2), (3, 0), (1, -1)])
    u = fluids.VelocityField2D(ux, uy, g)
    p1 = fluids.project_divfree(u)
    p2 = fluids.project_divfree(p1)
    idem = float(max(np.abs(p2.ux - p1.ux).max(), np.abs(p2.uy - p1.uy).max()))
    div = float(np.abs(p1.divergence()).max())
    elapsed = time.perf_counter() - start
    return _result("7 fluids", [
        ("pressure_err", p_err, p_err == 0.0),
        ("mass_drift", worst["mass"], worst["mass"] <= 1e-10),
        ("entropy_drift", worst["entropy"], worst["entropy"] <= 1e-10),
        ("momentum_drift", worst["momentum"], worst["momentum"] <= 1e-10),
        ("energy_drift", worst["energy"], worst["energy"] <= 1e-6),
        ("taylor_green_rhs", tg, tg <= 1e-10),
        ("proj_idempotence", idem, idem <= 1e-12),
        ("proj_divergence", div, div <= 1e-12),
        ("runtime_s", elapsed, elapsed < 30.0),
    ])


# 8 ---------------------------------------------------------------------


def _rb_final(dt, T=2.0):
    sys = lie_poisson.rigid_body([1.0, 2.0, 3.0])
    return lie_poisson.run(sys, [1.0, 0.5, -0.7], dt, int(round(T / dt))).states[-1]


def _marker_final(dt, T=2.0):
    h = proto.harmonic(1.0)
    m = proto.Markers(np.array([0.3, -0.2]), np.array([0.5, 1.0]), np.zeros(2), np.array([0.5, 0.5]), np.array([0.0, 0.5]))
    for i in range(int(round(T / dt))):
        m = proto.advance_markers(m, h, dt, 1.0, i * dt)
    return np.concatenate([m.x, m.p, m.S])


def _fluid_final(dt, T=1.0, n=64):
    x = np.arange(n) * 2 * np.pi / n
    U = fluids.linear_energy(b=0.5)
    st = fluids.FluidState(1 + 0.2 * np.sin(x), np.zeros(n), 0.1 * np.cos(x))
    for _ in range(int(round(T / dt))):
        st = fluids.step_fluid(st, U, dt)
    return np.concatenate([st.rho, st.p])


def check_order():
    slopes = {
        "rigid_body": richardson_slope(*(_rb_final(dt) for dt in (0.025, 0.05, 0.1))),
        "markers": richardson_slope(*(_marker_final(dt) for dt in (0.025, 0.05, 0.1))),
        "fluid": richardson_slope(*(_fluid_final(dt) for dt in (0.025, 0.05, 0.1))),
    }
    return _result("8 rk4 Richardson order", [(k, v, abs(v - 4) <= 0.3) for k, v in slopes.items()])


# 9 ---------------------------------------------------------------------


def golden_dir():
    return resources.files("protomech") / "data" / "golden"


def compare_csv(a, b, tol=1e-12):
    """(bit_exact, max abs difference) between two numeric CSV texts."""
    if a == b:
        return True, 0.0
    la, lb = a.splitlines(), b.splitlines()
    if len(la) != len(lb) or la[0] != lb[0]:
        return False, math.inf
    worst = 0.0
    for ra, rb in zip(la[1:], lb[1:]):
        va = np.array(ra.split(","), dtype=float)
        vb = np.array(rb.split(","), dtype=float)
        if va.shape != vb.shape:
            return False, math.inf
        worst = max(worst, float(np.abs(va - vb).max()))
    return False, worst


def check_cli():
    from .cli import main

    gd = golden_dir()
    config = (gd / "symmetric_top.json").read_text()
    sc = parse_config(config)
    parts = []
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        run_scenario(sc, tmp / "a")
        run_scenario(sc, tmp / "b")
        names = sorted(p.name for p in (tmp / "a").iterdir())
        same = all((tmp / "a" / f).read_bytes() == (tmp / "b" / f).read_bytes() for f in names)
        parts.append(("deterministic", same, same))
        worst, exact = 0.0, True
        for f in ("states.csv", "diagnostics.csv"):
            bit, diff = compare_csv((gd / f).read_text(), (tmp / "a" / f).read_text())
            exact = exact and bit
            worst = max(worst, diff)
        parts.append(("golden_bit_exact", exact, True))
        parts.append(("golden_max_diff", worst, worst <= 1e-12))

        doc = json.loads(config)
        doc["n_steps"] = 0
        run_scenario(parse_config(json.dumps(doc)), tmp / "zero")
        zero = sorted(p.name for p in (tmp / "zero").iterdir())
        parts.append(("zero_step_files", "+".join(zero), zero == ["states.csv"]))

        bad = tmp / "bad.json"
        bad.write_text(json.dumps({**doc, "dtt": 0.1}))
        code = main(["run", str(bad), "--out-dir", str(tmp / "badout")], quiet=True)
        leftovers = list((tmp / "badout").iterdir()) if (tmp / "badout").exists() else []
        parts.append(("invalid_exit", code, code == 1))
        parts.append(("invalid_files", len(leftovers), not leftovers))
        try:
            parse_config(json.dumps({**doc, "dtt": 0.1}))
            named = False
        except ConfigError as exc:
            named = "dtt" in str(exc)
        parts.append(("unknown_key_named", named, named))
    return _result("9 CLI determinism and golden run", parts)


ALL = (check_rigid_body, check_pairing_identity, check_free_particle, check_conservative_form, check_emergence,
       check_variational, check_fluids, check_order, check_cli)
SUITES = {
    "oracles": (check_rigid_body, check_pairing_identity, check_free_particle, check_emergence, check_variational),
    "conservation": (check_conservative_form, check_fluids, check_order),
    "all": ALL,
}


def run_checks(name):
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; valid suites: {', '.join(sorted(SUITES))}")
    out = []
    for fn in SUITES[name]:
        try:
            out.append(fn())
        except Exception as exc:  # a crashing check is a failing check
            out.append(CheckResult(fn.__name__, False, f"error: {type(exc).__name__}: {exc}"))
    return out


def format_table(results):
    width = max(len(r.name) for r in results)
    lines = [f"{'check'.ljust(width)}  result  detail"]
    for r in results:
        lines.append(f"{r.name.ljust(width)}  {'PASS' if r.passed else 'FAIL'}    {r.detail}")
    return "\n".join(lines)

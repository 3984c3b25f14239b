"""JSON scenarios: validation, serialization and execution."""

import copy
import csv
import io
import json
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fluids, functionals, lie_poisson, proto, spectral
from .algebra import AlgebraSpec
from .expr import Expression, ExpressionError


class ConfigError(ValueError):
    """Invalid scenario document."""


class ScenarioError(RuntimeError):
    """Engine failure while running a valid scenario."""


REQUIRED = object()

COMMON = {"kind": REQUIRED, "name": None, "seed": 0}

DEFAULTS = {
    "lie_poisson": {
        "dt": 1e-3,
        "n_steps": 1000,
        "inertia": [1.0, 1.0, 2.0],
        "mu0": REQUIRED,
        "scheme": "rk4",
        "algebra": None,
    },
    "proto": {
        "n": 128,
        "length": "2*pi",
        "hbar": 1.0,
        "dt": 1e-3,
        "n_steps": 1000,
        "S0": REQUIRED,
        "rho0": "1",
        "winding": None,
        "hamiltonian": {"type": "free"},
        "shadow": None,
    },
    "functional_check": {
        "n": 128,
        "length": "2*pi",
        "hbar": 1.0,
        "functional": REQUIRED,
        "members": REQUIRED,
        "probes": 10,
    },
    "fluid_compressible": {
        "n": 256,
        "length": "2*pi",
        "dt": 1e-3,
        "n_steps": 1000,
        "rho0": REQUIRED,
        "sigma0": "0",
        "p0": "0",
        "energy": {"U": "rho/2", "dU_drho": "1/2", "dU_dsigma": "0"},
    },
    "fluid_euler2d": {
        "n": 64,
        "dt": 1e-3,
        "n_steps": 1000,
        "ux0": REQUIRED,
        "uy0": REQUIRED,
    },
}

HAMILTONIAN_KEYS = {
    "free": {"type", "mass"},
    "harmonic": {"type", "mass", "omega"},
    "relativistic": {"type", "mass", "c"},
    "potential": {"type", "mass", "V", "dV"},
}
ENERGY_KEYS = {"U", "dU_drho", "dU_dsigma"}
MEMBER_KEYS = {"weight", "S", "rho", "winding"}
SPECTRAL_KINDS = {"proto", "functional_check", "fluid_compressible", "fluid_euler2d"}


@dataclass
class Scenario:
    kind: str
    params: dict = field(default_factory=dict)

    @property
    def name(self):
        return self.params.get("name") or self.kind


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _positive_number(key, v):
    if not _is_number(v) or not np.isfinite(v) or v <= 0:
        raise ConfigError(f"{key} must be a positive number, got {v!r}")


def _expression(key, v, names):
    if _is_number(v):
        return
    try:
        Expression(v, names)
    except ExpressionError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _length_value(v):
    return float(v) if _is_number(v) else float(Expression(v, ())())


def _validate(kind, p):
    for key in ("dt", "hbar"):
        if key in p:
            _positive_number(key, p[key])
    if "n_steps" in p and (not isinstance(p["n_steps"], int) or isinstance(p["n_steps"], bool) or p["n_steps"] < 0):
        raise ConfigError(f"n_steps must be a nonnegative integer, got {p['n_steps']!r}")
    if not isinstance(p["seed"], int) or isinstance(p["seed"], bool) or p["seed"] < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {p['seed']!r}")
    if kind in SPECTRAL_KINDS:
        n = p["n"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 8 or n & (n - 1):
            raise ConfigError(f"n must be a power of two >= 8, got {n!r}")
    if "length" in p:
        _expression("length", p["length"], ())
        if _length_value(p["length"]) <= 0:
            raise ConfigError("length must be positive")

    if kind == "lie_poisson":
        if p["scheme"] not in lie_poisson.SCHEMES:
            raise ConfigError(f"scheme must be one of {sorted(lie_poisson.SCHEMES)}, got {p['scheme']!r}")
        dim = 3
        if p["algebra"] is not None:
            try:
                dim = AlgebraSpec.from_json(p["algebra"]).dim
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"algebra: {exc}") from None
        for key in ("mu0", "inertia"):
            v = p[key]
            if not isinstance(v, list) or len(v) != dim or not all(_is_number(a) for a in v):
                raise ConfigError(f"{key} must be a list of {dim} numbers")
        if any(a <= 0 for a in p["inertia"]):
            raise ConfigError("inertia entries must be positive")
    elif kind == "proto":
        for key in ("S0", "rho0"):
            _expression(key, p[key], ("x",))
        if p["winding"] is not None and not _is_number(p["winding"]):
            raise ConfigError("winding must be a number or null")
        h = p["hamiltonian"]
        if not isinstance(h, dict) or h.get("type") not in HAMILTONIAN_KEYS:
            raise ConfigError(f"hamiltonian.type must be one of {sorted(HAMILTONIAN_KEYS)}")
        extra = set(h) - HAMILTONIAN_KEYS[h["type"]]
        if extra:
            raise ConfigError(f"unknown key {sorted(extra)[0]!r} in hamiltonian")
        for key in ("mass", "omega", "c"):
            if key in h:
                _positive_number(f"hamiltonian.{key}", h[key])
        if h["type"] == "potential":
            if "V" not in h:
                raise ConfigError("missing key 'V' in hamiltonian")
            for key in ("V", "dV"):
                if key in h:
                    _expression(f"hamiltonian.{key}", h[key], ("x",))
        if p["shadow"] is not None:
            _expression("shadow", p["shadow"], ("x", "t"))
    elif kind == "functional_check":
        try:
            functionals.parse_functional(p["functional"])
        except (ValueError, AttributeError) as exc:
            raise ConfigError(f"functional: {exc}") from None
        members = p["members"]
        if not isinstance(members, list) or not members:
            raise ConfigError("members must be a nonempty list")
        for i, m in enumerate(members):
            if not isinstance(m, dict):
                raise ConfigError(f"members[{i}] must be an object")
            extra = set(m) - MEMBER_KEYS
            if extra:
                raise ConfigError(f"unknown key {sorted(extra)[0]!r} in members[{i}]")
            for key in ("weight", "S", "rho"):
                if key not in m:
                    raise ConfigError(f"missing key {key!r} in members[{i}]")
            if not _is_number(m["weight"]) or m["weight"] < 0:
                raise ConfigError(f"members[{i}].weight must be a nonnegative number")
            _expression(f"members[{i}].S", m["S"], ("x",))
            _expression(f"members[{i}].rho", m["rho"], ("x",))
        if abs(sum(m["weight"] for m in members) - 1.0) > 1e-12:
            raise ConfigError("member weights must sum to 1")
        if not isinstance(p["probes"], int) or p["probes"] < 1:
            raise ConfigError("probes must be a positive integer")
    elif kind == "fluid_compressible":
        for key in ("rho0", "sigma0", "p0"):
            _expression(key, p[key], ("x",))
        e = p["energy"]
        if not isinstance(e, dict):
            raise ConfigError("energy must be an object")
        extra = set(e) - ENERGY_KEYS
        if extra:
            raise ConfigError(f"unknown key {sorted(extra)[0]!r} in energy")
        for key in sorted(ENERGY_KEYS):
            if key not in e:
                raise ConfigError(f"missing key {key!r} in energy")
            _expression(f"energy.{key}", e[key], ("rho", "sigma"))
    elif kind == "fluid_euler2d":
        for key in ("ux0", "uy0"):
            _expression(key, p[key], ("x", "y"))


def parse_config(text):
    """Validate a JSON scenario document and fill documented defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("scenario must be a JSON object")
    if "kind" not in doc:
        raise ConfigError("missing key 'kind'")
    kind = doc["kind"]
    if kind not in DEFAULTS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {sorted(DEFAULTS)}")
    schema = {**COMMON, **DEFAULTS[kind]}
    for key in doc:
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} for kind {kind!r}")
    params = {}
    for key, default in schema.items():
        if key in doc:
            params[key] = copy.deepcopy(doc[key])
        elif default is REQUIRED:
            raise ConfigError(f"missing key {key!r} for kind {kind!r}")
        else:
            params[key] = copy.deepcopy(default)
    _validate(kind, params)
    return Scenario(kind, params)


def serialize(scenario):
    return json.dumps(scenario.params, sort_keys=True, indent=2)


# ---------------------------------------------------------------- execution


def _grid(n, length):
    return np.arange(n) * length / n


def _field(v, **env):
    if _is_number(v):
        shape = np.broadcast(*env.values()).shape
        return np.full(shape, float(v))
    return Expression(v, tuple(env))(**env)


def _rows_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.17g}" for v in row])
    return buf.getvalue()


def build_hamiltonian(spec):
    kind = spec["type"]
    mass = float(spec.get("mass", 1.0))
    if kind == "free":
        return proto.kinetic(mass)
    if kind == "harmonic":
        return proto.harmonic(float(spec.get("omega", 1.0)), mass)
    if kind == "relativistic":
        return proto.relativistic(mass, float(spec.get("c", 1.0)))
    V = Expression(spec["V"], ("x",))
    dV = Expression(spec["dV"], ("x",)) if "dV" in spec else None
    return proto.kinetic(mass, lambda x: V(x=x), None if dV is None else (lambda x: dV(x=x)))


def _run_lie_poisson(p, outputs):
    inertia = np.asarray(p["inertia"], dtype=float)
    if p["algebra"] is None:
        sys = lie_poisson.rigid_body(inertia)
    else:
        alg = AlgebraSpec.from_json(p["algebra"])
        inv = 1.0 / inertia
        sys = lie_poisson.LPSystem(
            alg,
            lambda mu: 0.5 * float(np.sum(inv * mu**2)),
            grad_h=lambda mu: np.linalg.solve(alg.metric, inv * mu),
            name="quadratic",
        )
    traj = lie_poisson.run(sys, p["mu0"], p["dt"], p["n_steps"], p["scheme"])
    header = ["time"] + [f"mu_{i}" for i in range(traj.states.shape[1])]
    outputs["states.csv"] = _rows_csv(header, np.column_stack([traj.times, traj.states]))
    summary = {"final_state": traj.states[-1].tolist()}
    if p["n_steps"] >= 1:
        outputs["diagnostics.csv"] = traj.to_csv()
        summary["energy_drift"] = float(np.abs(traj.energy - traj.energy[0]).max())
        if traj.casimirs.size:
            summary["casimir_drift"] = float(np.abs(traj.casimirs - traj.casimirs[0]).max())
    return summary


def _run_proto(p, outputs):
    length = _length_value(p["length"])
    x = _grid(p["n"], length)
    S0 = _field(p["S0"], x=x)
    rho0 = _field(p["rho0"], x=x)
    state = proto.ProtoState.from_fields(S0, rho0, length, hbar=p["hbar"], winding=p["winding"])
    h = build_hamiltonian(p["hamiltonian"])
    outputs["snapshot_initial.csv"] = proto.snapshot_csv(state, h)
    summary = {}
    if p["n_steps"] == 0:
        return summary
    history = proto.run_proto(state, h, p["dt"], p["n_steps"])
    final = history[-1]
    outputs["snapshot_final.csv"] = proto.snapshot_csv(final, h)
    m0 = state.markers
    e0 = h.value(m0.x, m0.p)
    rows = [
        (s.time, float(np.sum(s.rho) * s.dx), float(np.abs(h.value(s.markers.x, s.markers.p, s.time) - e0).max()))
        for s in history
    ]
    header = ["time", "mass", "energy_drift"]
    summary["energy_drift"] = proto.energy_drift(history, h)
    if p["shadow"] is not None:
        R = Expression(p["shadow"], ("x", "t"))
        shadow = proto.ShadowSpec(lambda xx, t: R(x=xx, t=np.full_like(np.asarray(xx, dtype=float), t)))
        f0 = proto.marker_frequency(history[0], shadow, h)
        rows = [r + (float(np.abs(proto.marker_frequency(s, shadow, h) - f0).max()),) for r, s in zip(rows, history)]
        header.append("frequency_drift")
        events = proto.detect_emergence(history, shadow)
        outputs["events.csv"] = proto.events_csv(events)
        summary["n_events"] = len(events)
        summary["frequency_drift"] = proto.frequency_drift(history, shadow, h)
    outputs["diagnostics.csv"] = _rows_csv(header, rows)
    summary["mass"] = rows[-1][1]
    return summary


def _run_functional(p, outputs, seed):
    length = _length_value(p["length"])
    n = p["n"]
    x = _grid(n, length)
    F = functionals.parse_functional(p["functional"])
    members, windings = [], []
    for m in p["members"]:
        members.append((float(m["weight"]), _field(m["S"], x=x), _field(m["rho"], x=x)))
        windings.append(float(m.get("winding", 0.0)))
    J = functionals.EmergenceMomentum(tuple(members), length, p["hbar"], tuple(windings))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for (w, _, rho), mom in zip(J.members, J.momenta()):
        X = functionals.variational_derivative(F, rho, mom, length, J.hbar)
        for _ in range(p["probes"]):
            a = rng.normal(size=6)
            dp = a[0] + sum(a[k] * np.sin(k * 2 * np.pi * x / length + a[k - 1]) for k in range(1, 6))
            g = functionals.gateaux_derivative(F, rho, mom, dp, length, J.hbar)
            scale = 1.0 + abs(g)
            worst = max(worst, abs(g - float(np.sum(rho * dp * X)) * J.dx) / scale)
    value = functionals.evaluate(F, J)
    nl = functionals.null_lagrangian_residual(F, J)
    order = functionals.classify_order(F)
    outputs["functional_report.csv"] = (
        "functional,order,value,null_lagrangian_residual,gateaux_error,normalization\n"
        f"\"{F.to_text()}\",{order},{value:.17g},{nl:.17g},{worst:.17g},{functionals.normalization(J):.17g}\n"
    )
    return {"order": order, "value": value, "null_lagrangian_residual": nl, "gateaux_error": worst}


def _energy_spec(e):
    names = ("rho", "sigma")
    U, dr, ds = (Expression(e[k], names) for k in ("U", "dU_drho", "dU_dsigma"))
    return fluids.InternalEnergySpec(
        U=lambda r, s: U(rho=r, sigma=s),
        dU_drho=lambda r, s: dr(rho=r, sigma=s),
        dU_dsigma=lambda r, s: ds(rho=r, sigma=s),
    )


def _run_fluid(p, outputs):
    length = _length_value(p["length"])
    x = _grid(p["n"], length)
    state = fluids.FluidState(_field(p["rho0"], x=x), _field(p["sigma0"], x=x), _field(p["p0"], x=x), length)
    U = _energy_spec(p["energy"])
    outputs["snapshot_initial.csv"] = fluids.snapshot_csv_1d(state)
    if p["n_steps"] == 0:
        return {}
    rows = [(state.time, fluids.fluid_diagnostics(state, U))]
    for _ in range(p["n_steps"]):
        state = fluids.step_fluid(state, U, p["dt"])
        rows.append((state.time, fluids.fluid_diagnostics(state, U)))
    cols = ["mass", "entropy", "momentum", "energy"]
    outputs["snapshot_final.csv"] = fluids.snapshot_csv_1d(state)
    outputs["diagnostics.csv"] = fluids.diagnostics_csv(rows, cols)
    return {f"{c}_drift": abs(rows[-1][1][c] - rows[0][1][c]) for c in cols}


def _run_euler2d(p, outputs):
    g = spectral.Grid2D(p["n"])
    u = fluids.VelocityField2D(_field(p["ux0"], x=g.x, y=g.y), _field(p["uy0"], x=g.x, y=g.y), g)
    u = fluids.project_divfree(u)
    outputs["snapshot_initial.csv"] = fluids.snapshot_csv_2d(u)
    if p["n_steps"] == 0:
        return {}
    rows = [(u.time, fluids.euler2d_diagnostics(u))]
    for _ in range(p["n_steps"]):
        u = fluids.step_euler2d(u, p["dt"])
        rows.append((u.time, fluids.euler2d_diagnostics(u)))
    cols = ["energy", "enstrophy", "momentum_x", "momentum_y"]
    outputs["snapshot_final.csv"] = fluids.snapshot_csv_2d(u)
    outputs["diagnostics.csv"] = fluids.diagnostics_csv(rows, cols)
    return {f"{c}_drift": abs(rows[-1][1][c] - rows[0][1][c]) for c in cols}


def write_atomic(out_dir, outputs):
    """Write every file to a temp name first, then rename them all."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in outputs.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out_dir)
            staged.append((tmp, out_dir / name))
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)
    return [str(final) for _, final in staged]


def run_scenario(scenario, out_dir, seed=None):
    """Run a validated scenario; returns a summary dict. Outputs are all-or-nothing."""
    p = scenario.params
    seed = p["seed"] if seed is None else seed
    outputs = {}
    start = time.perf_counter()
    try:
        if scenario.kind == "lie_poisson":
            summary = _run_lie_poisson(p, outputs)
        elif scenario.kind == "proto":
            summary = _run_proto(p, outputs)
        elif scenario.kind == "functional_check":
            summary = _run_functional(p, outputs, seed)
        elif scenario.kind == "fluid_compressible":
            summary = _run_fluid(p, outputs)
        else:
            summary = _run_euler2d(p, outputs)
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        raise ScenarioError(f"scenario {scenario.name!r} ({scenario.kind}): {exc}") from exc
    files = write_atomic(out_dir, outputs)
    return {
        "scenario": scenario.name,
        "kind": scenario.kind,
        "seed": seed,
        "summary": summary,
        "outputs": files,
        "wall_time": time.perf_counter() - start,
    }

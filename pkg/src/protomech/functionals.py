"""Polynomial functionals of the momentum field and their rho-weighted derivatives.

A functional is a sum of monomials ``coeff * x^a * prod_k (D^{d_k} p)^{e_k}``
where ``D^d p = hbar^d d^d p / dx^d``. The derivative of order ``d`` carries
``d`` factors of hbar, so derivative-bearing terms vanish in the classical
limit hbar -> 0 at fixed p.
"""

import re
from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .proto import _momentum


@dataclass(frozen=True)
class Monomial:
    coeff: float
    x_power: int = 0
    factors: tuple = ()  # ((derivative_order, power), ...)

    def __post_init__(self):
        merged = {}
        for order, power in self.factors:
            if order < 0 or power < 0:
                raise ValueError("derivative orders and powers must be nonnegative")
            if power:
                merged[int(order)] = merged.get(int(order), 0) + int(power)
        if self.x_power < 0:
            raise ValueError("x power must be nonnegative")
        object.__setattr__(self, "factors", tuple(sorted(merged.items())))

    @property
    def derivative_weight(self):
        """Total number of hbar factors: sum of order * power."""
        return sum(d * e for d, e in self.factors)

    @property
    def max_order(self):
        return max((d for d, _ in self.factors), default=0)


@dataclass(frozen=True)
class FunctionalSpec:
    terms: tuple = field(default_factory=tuple)

    def __add__(self, other):
        return FunctionalSpec(tuple(self.terms) + tuple(other.terms))

    @property
    def max_order(self):
        return max((t.max_order for t in self.terms), default=0)

    def orders(self):
        return sorted({d for t in self.terms for d, _ in t.factors} | {0})

    def to_text(self):
        if not self.terms:
            return "0"
        parts = []
        for t in self.terms:
            toks = [repr(float(t.coeff))]
            if t.x_power:
                toks.append("x" if t.x_power == 1 else f"x^{t.x_power}")
            for d, e in t.factors:
                name = "p" if d == 0 else f"D{d}p"
                toks.append(name if e == 1 else f"{name}^{e}")
            parts.append(" * ".join(toks))
        return " + ".join(parts)


_TOKEN = re.compile(r"^(x|p|D(\d+)p)(?:\^(\d+))?$")


def parse_functional(text):
    """Parse e.g. ``"2.0 * p^2 + 1.0 * D1p^2"``.

    Grammar: '+'-separated terms; each term is '*'-separated factors, one of
    which may be a numeric coefficient; other factors are ``x``, ``p`` or
    ``D<k>p`` with optional ``^<power>``. A bare ``0`` is the zero functional.
    """
    text = text.strip()
    if not text:
        raise ValueError("empty functional")
    if text == "0":
        return FunctionalSpec(())
    terms = []
    # '+' separates terms, but not the sign of an exponent like 1e+3
    for raw in re.split(r"(?<![eE])\+", text):
        raw = raw.strip()
        if not raw:
            raise ValueError(f"empty term in {text!r}")
        coeff, x_power, factors = 1.0, 0, []
        for tok in (s.strip() for s in raw.split("*")):
            m = _TOKEN.match(tok)
            if m is None:
                try:
                    coeff *= float(tok)
                except ValueError:
                    raise ValueError(f"bad token {tok!r} in {text!r}") from None
                continue
            power = int(m.group(3)) if m.group(3) else 1
            if m.group(1) == "x":
                x_power += power
            elif m.group(1) == "p":
                factors.append((0, power))
            else:
                factors.append((int(m.group(2)), power))
        terms.append(Monomial(coeff, x_power, tuple(factors)))
    return FunctionalSpec(tuple(terms))


def classify_order(F):
    """1 + the highest derivative order; 1 means classical (local in p)."""
    return 1 + F.max_order


def is_classical(F):
    return classify_order(F) == 1


@dataclass(frozen=True)
class EmergenceMomentum:
    """Finite weighted ensemble of (phase, density) sections on a shared grid.

    ``hbar`` converts phase to momentum, p = hbar dS/dx.
    """

    members: tuple  # ((weight, S, rho), ...)
    length: float = 2.0 * np.pi
    hbar: float = 1.0
    windings: tuple = None

    def __post_init__(self):
        if not self.members:
            raise ValueError("ensemble is empty")
        n = np.asarray(self.members[0][1]).size
        total = 0.0
        for w, S, rho in self.members:
            if np.asarray(S).shape != (n,) or np.asarray(rho).shape != (n,):
                raise ValueError("ensemble members must share one grid")
            if w < 0 or np.any(np.asarray(rho) < 0):
                raise ValueError("weights and densities must be nonnegative")
            total += w
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"ensemble weights sum to {total}, expected 1")
        if self.windings is None:
            object.__setattr__(self, "windings", tuple(0.0 for _ in self.members))

    @property
    def n(self):
        return np.asarray(self.members[0][1]).size

    @property
    def x(self):
        return np.arange(self.n) * self.length / self.n

    @property
    def dx(self):
        return self.length / self.n

    def momenta(self):
        x = self.x
        return [
            _momentum(np.asarray(S, dtype=float), wnd, self.length, 0.0, x, self.hbar)
            for (_, S, _), wnd in zip(self.members, self.windings)
        ]

    @classmethod
    def from_states(cls, states, weights=None):
        """Ensemble from ProtoStates that share grid, x0 = 0 and hbar."""
        weights = [1.0 / len(states)] * len(states) if weights is None else weights
        s0 = states[0]
        return cls(
            tuple((w, s.S, s.rho) for w, s in zip(weights, states)),
            length=s0.length,
            hbar=s0.hbar,
            windings=tuple(s.winding for s in states),
        )


def derivatives(p, length, hbar, orders):
    """{d: D^d p} for the requested orders."""
    return {d: (hbar**d) * spectral.derivative(p, length, d) if d else p for d in orders}


def _monomial_value(m, x, dp):
    val = m.coeff * np.ones_like(x)
    if m.x_power:
        val = val * x**m.x_power
    for d, e in m.factors:
        val = val * dp[d] ** e
    return val


def density(F, x, p, length, hbar, select=None):
    """Pointwise value F(x, p, Dp, ...); ``select`` filters monomials."""
    dp = derivatives(p, length, hbar, F.orders())
    out = np.zeros_like(x, dtype=float)
    for m in F.terms:
        if select is None or select(m):
            out = out + _monomial_value(m, x, dp)
    return out


def partial(F, order, x, p, length, hbar):
    """dF / d(D^order p) evaluated pointwise."""
    dp = derivatives(p, length, hbar, F.orders())
    out = np.zeros_like(x, dtype=float)
    for m in F.terms:
        powers = dict(m.factors)
        e = powers.get(order, 0)
        if e == 0:
            continue
        rest = Monomial(m.coeff * e, m.x_power, tuple((d, q - (d == order)) for d, q in m.factors))
        out = out + _monomial_value(rest, x, dp)
    return out


def evaluate(F, J, hbar=None, select=None):
    """Sum over members of weight * integral of rho * F dx.

    ``hbar`` weights the D operator; it defaults to the ensemble's own hbar.
    Momenta always use the ensemble's hbar, so varying ``hbar`` here probes the
    classical limit at fixed p.
    """
    hbar = J.hbar if hbar is None else hbar
    x = J.x
    total = 0.0
    for (w, _, rho), p in zip(J.members, J.momenta()):
        total += w * float(np.sum(np.asarray(rho) * density(F, x, p, J.length, hbar, select)) * J.dx)
    return total


def variational_derivative(F, rho, p, length=2.0 * np.pi, hbar=1.0):
    """(1/rho) sum_d hbar^d (-d/dx)^d (rho dF/d(D^d p)).

    Points where rho == 0 are masked and returned as 0.
    """
    rho = np.asarray(rho, dtype=float)
    p = np.asarray(p, dtype=float)
    if not np.any(rho > 0):
        raise ValueError("rho must be positive somewhere")
    x = np.arange(p.size) * length / p.size
    acc = np.zeros_like(p)
    for d in F.orders():
        part = partial(F, d, x, p, length, hbar)
        if not np.any(part):
            continue
        term = rho * part
        if d:
            term = (-hbar) ** d * spectral.derivative(term, length, d)
        acc = acc + term
    out = np.zeros_like(p)
    mask = rho > 0
    out[mask] = acc[mask] / rho[mask]
    return out


def hat_operator(F, rho, p, length=2.0 * np.pi, hbar=1.0):
    """(X, U) = (D_rho F, -p D_rho F + F)."""
    X = variational_derivative(F, rho, p, length, hbar)
    x = np.arange(np.size(p)) * length / np.size(p)
    U = -p * X + density(F, x, p, length, hbar)
    return X, U


def pairing_with_hat(F, J, hbar=None):
    """<J, F_hat> = sum of weight * integral(rho p X + rho U) dx."""
    hbar = J.hbar if hbar is None else hbar
    total = 0.0
    for (w, _, rho), p in zip(J.members, J.momenta()):
        rho = np.asarray(rho, dtype=float)
        X, U = hat_operator(F, rho, p, J.length, hbar)
        total += w * float(np.sum(rho * p * X + rho * U) * J.dx)
    return total


def null_lagrangian_residual(F, J, hbar=None):
    return abs(evaluate(F, J, hbar) - pairing_with_hat(F, J, hbar))


def gateaux_derivative(F, rho, p, dp, length=2.0 * np.pi, hbar=1.0, eps=1e-6):
    """Central-difference d/de of integral rho F(p + e dp) dx."""
    x = np.arange(np.size(p)) * length / np.size(p)
    dx = length / np.size(p)

    def value(e):
        return float(np.sum(rho * density(F, x, p + e * dp, length, hbar)) * dx)

    return (value(eps) - value(-eps)) / (2 * eps)


def normalization(J):
    """I(J): total emergence mass over the ensemble."""
    return sum(w * float(np.sum(rho) * J.dx) for w, _, rho in J.members)


def classical_limit_scaling(F, J, hbars):
    """Value of the derivative-bearing part of F at each hbar, with p held fixed."""
    return [evaluate(F, J, hb, select=lambda m: m.derivative_weight > 0) for hb in hbars]

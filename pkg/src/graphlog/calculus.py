"""Discrete calculus on a :class:`~graphlog.graph.GraphInstance`.

Fields are plain float arrays indexed by dense vertex number.  All integrals
are ``mu``-weighted vertex sums accumulated with :func:`math.fsum`.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BoundaryViolation, InvalidP, NegativePotentialWarning, ParseError, UnknownVertex
from .graph import GraphInstance

__all__ = [
    "FieldPair",
    "as_field",
    "field_to_dict",
    "field_from_dict",
    "load_field",
    "gradient_form",
    "gradient_length",
    "grad_power",
    "p_laplacian",
    "integrate",
    "lp_norm",
    "h_norm",
    "dirichlet_norm",
]


def as_field(g: GraphInstance, values) -> np.ndarray:
    u = np.asarray(values, dtype=float)
    if u.shape != (g.n,):
        raise ValueError(f"field has shape {u.shape}, graph has {g.n} vertices")
    return u


@dataclass(frozen=True, eq=False)
class FieldPair:
    """The unknowns ``(u, v)`` of the coupled system, on one graph."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        v = np.array(self.v, dtype=float)
        if u.shape != v.shape or u.ndim != 1:
            raise ValueError("u and v must be 1-d arrays on the same vertex set")
        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n))

    @classmethod
    def from_vector(cls, w):
        w = np.asarray(w, dtype=float)
        n = w.size // 2
        return cls(w[:n], w[n:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.u, self.v])

    def scaled(self, t) -> "FieldPair":
        return FieldPair(t * self.u, t * self.v)

    def flipped(self, su=1, sv=1) -> "FieldPair":
        return FieldPair(su * self.u, sv * self.v)

    def __add__(self, other):
        return FieldPair(self.u + other.u, self.v + other.v)

    def __sub__(self, other):
        return FieldPair(self.u - other.u, self.v - other.v)

    def is_zero(self) -> bool:
        return not (np.any(self.u) or np.any(self.v))

    def __eq__(self, other):
        if not isinstance(other, FieldPair):
            return NotImplemented
        return np.array_equal(self.u, other.u) and np.array_equal(self.v, other.v)

    __hash__ = object.__hash__


# --------------------------------------------------------------------------
# field JSON: {"values": {vertex-id: float}}, missing ids are zero

def field_to_dict(g: GraphInstance, u) -> dict:
    return {"values": {str(g.ids[x]): float(val) for x, val in enumerate(as_field(g, u))}}


def field_from_dict(g: GraphInstance, data) -> np.ndarray:
    try:
        values = data["values"]
        u = np.zeros(g.n)
        for key, val in values.items():
            u[g.index(int(key))] = float(val)
    except UnknownVertex:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ParseError(f"malformed field record: {exc}") from exc
    return u


def load_field(path, g: GraphInstance) -> np.ndarray:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return field_from_dict(g, data)


# --------------------------------------------------------------------------
# operators

def _edge_sum(g, per_edge_i, per_edge_j):
    # per-vertex sum of edge quantities, as seen from endpoint i and endpoint j
    ei, ej = g.edges
    return np.bincount(ei, per_edge_i, minlength=g.n) + np.bincount(ej, per_edge_j, minlength=g.n)


def _at(g, values, x):
    if x is None:
        return values
    return float(values[g.check_vertex(x)])


def gradient_form(g: GraphInstance, u, w, x=None):
    """``Gamma(u, w)(x) = 1/(2 mu(x)) sum_{y~x} (u(y)-u(x)) (w(y)-w(x))``.

    Returns the whole vertex array, or the value at ``x`` when given.
    """
    ei, ej = g.edges
    prod = (u[ej] - u[ei]) * (w[ej] - w[ei])
    return _at(g, _edge_sum(g, prod, prod) / (2.0 * g.mu), x)


def gradient_length(g: GraphInstance, u, x=None):
    return _at(g, np.sqrt(gradient_form(g, u, u)), x)


def grad_power(g: GraphInstance, u, q: float) -> np.ndarray:
    """``|grad u|^q`` per vertex, with ``0^q = 0`` for ``q > 0``."""
    gamma = gradient_form(g, u, u)
    return gamma ** (0.5 * q)


def p_laplacian(g: GraphInstance, u, p: float, x=None):
    """``Delta_p u(x) = 1/(2 mu(x)) sum_{y~x} (|grad u|^{p-2}(y) + |grad u|^{p-2}(x)) (u(y)-u(x))``."""
    if p < 2:
        raise InvalidP(f"p-Laplacian needs p >= 2, got p={p}")
    ei, ej = g.edges
    weight = grad_power(g, u, p - 2.0)
    flux = (weight[ei] + weight[ej]) * (u[ej] - u[ei])
    return _at(g, _edge_sum(g, flux, -flux) / (2.0 * g.mu), x)


def integrate(g: GraphInstance, f, where=None) -> float:
    """``sum_x mu(x) f(x)``, optionally restricted to a boolean mask."""
    terms = g.mu * np.asarray(f, dtype=float)
    if where is not None:
        terms = terms[where]
    return math.fsum(terms.tolist())


def lp_norm(g: GraphInstance, u, q: float) -> float:
    u = np.asarray(u, dtype=float)
    if q == math.inf:
        return float(np.max(np.abs(u))) if u.size else 0.0
    if q < 1:
        raise ValueError("lp_norm needs q >= 1")
    return integrate(g, np.abs(u) ** q) ** (1.0 / q)


def h_norm(g: GraphInstance, u, potential, p: float) -> float:
    """``[int (|grad u|^p + potential |u|^p)]^{1/p}``.

    A negative potential anywhere triggers :class:`NegativePotentialWarning`
    because the bracket may then fail to be a norm.
    """
    potential = np.broadcast_to(np.asarray(potential, dtype=float), (g.n,))
    if np.any(potential < 0):
        warnings.warn("potential is negative somewhere; h_norm may be undefined", NegativePotentialWarning)
    total = integrate(g, grad_power(g, u, p) + potential * np.abs(u) ** p)
    return max(total, 0.0) ** (1.0 / p)


def dirichlet_norm(g: GraphInstance, u, omega, p: float) -> float:
    """Zero-boundary norm over ``omega``; gradients are integrated on ``omega`` and its boundary."""
    u = np.asarray(u, dtype=float)
    inside = g.mask(omega)
    rim = g.mask(g.boundary(omega))
    if np.any(u[rim] != 0):
        x = int(np.flatnonzero(rim & (u != 0))[0])
        raise BoundaryViolation(f"field is nonzero on the boundary vertex {g.ids[x]}")
    # values away from omega and its boundary do not enter the norm
    u = np.where(inside, u, 0.0)
    total = integrate(g, grad_power(g, u, p), where=inside | rim) + integrate(g, np.abs(u) ** p, where=inside)
    return total ** (1.0 / p)

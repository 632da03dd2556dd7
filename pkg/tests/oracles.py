"""Independent references shared by the module tests and the acceptance suite."""

import math

import numpy as np

from gvebarrier import BodyParams, CartesianState, OrbitalElements, cartesian_to_elements, elements_to_cartesian
from gvebarrier.orbit import stw_basis

MU = 398600.4418


def wrap(d):
    return (d + math.pi) % (2 * math.pi) - math.pi


def oracle_rates(x, theta, u, mu=MU, h=None):
    """Element and anomaly rates by central differences through the Cartesian map.

    The slow elements depend on (r, v) only, so their rate under thrust is the
    directional derivative along (0, u_cart). The anomaly also moves under
    gravity, so it is differentiated along the full two-body-plus-thrust field.
    """
    body = BodyParams(mu)
    s = elements_to_cartesian(x, theta, body)
    u_cart = stw_basis(s).T @ np.asarray(u, dtype=float)
    r, v = s.position, s.velocity
    acc = -mu * r / np.linalg.norm(r) ** 3 + u_cart
    h = h or 1e-6 / np.linalg.norm(u_cart)

    def elements(rr, vv):
        el, th = cartesian_to_elements(CartesianState(rr, vv), body)
        return el.as_array(), th

    ep, _ = elements(r, v + h * u_cart)
    em, _ = elements(r, v - h * u_cart)
    d = ep - em
    d[2:] = [wrap(z) for z in d[2:]]
    k = 1e-3
    _, tp = elements(r + k * v, v + k * acc)
    _, tm = elements(r - k * v, v - k * acc)
    return d / (2 * h), wrap(tp - tm) / (2 * k)


def random_state(rng):
    x = OrbitalElements(rng.uniform(7000.0, 40000.0), rng.uniform(0.01, 0.8),
                        rng.uniform(0.1, math.pi - 0.1), rng.uniform(0, 2 * math.pi),
                        rng.uniform(0, 2 * math.pi))
    return x, rng.uniform(0, 2 * math.pi), rng.uniform(-1e-3, 1e-3, 3)

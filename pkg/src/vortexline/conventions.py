"""Pointwise one-form algebra on oriented euclidean surfaces.

One-forms are carried as component pairs (p, q) meaning p dx + q dy.  With
orientation dx ^ dy and the star convention *dx = dy, *dy = -dx of the
surface module:

    star(p, q)           = (-q, p)
    wedge_density        (a ^ b) / (dx ^ dy) = p_a q_b - q_a p_b
    complex pairing      <f, g> = conj(f) g  (antilinear in the first slot)

These are trivial formulas, but fixing them in one place keeps every sign
in the moduli calculations traceable to the table above.
"""

from __future__ import annotations

import numpy as np

__all__ = ["star_one_form", "wedge_density", "pairing"]


def star_one_form(p, q):
    """Hodge star of p dx + q dy: components of -q dx + p dy."""
    return -q, p


def wedge_density(p1, q1, p2, q2):
    """Coefficient of dx ^ dy in (p1 dx + q1 dy) ^ (p2 dx + q2 dy)."""
    return p1 * q2 - q1 * p2


def pairing(f, g):
    """Hermitian pairing conj(f) * g, antilinear in the first argument."""
    return np.conjugate(f) * g

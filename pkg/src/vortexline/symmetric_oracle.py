"""Brute-force intersection numbers on symmetric products of a surface.

Independent cross-check for the closed evaluation rule used by the
cohomology module.  Nothing here knows that rule: classes on Sym^r(Sigma_g)
are pulled back along the degree-r! covering q: Sigma^r -> Sym^r and
multiplied in the full graded tensor algebra H*(Sigma)^{tensor r} with
Koszul signs, then integrated by reading off the top coefficient:

    int_{Sym^r} c = (1/r!) * [e x e x ... x e] (q* c).

H*(Sigma_g) is the standard presentation: 1, alpha_1..alpha_g,
beta_1..beta_g (degree 1), e (the point class, degree 2), with
alpha_i beta_j = delta_ij e, beta_i alpha_j = -delta_ij e and all other
positive-degree products zero.

The module also builds the diagonal class and its pushforward so the
"square of the incidence divisor" identity can be certified without the
symmetric-product shortcut: on Sigma^r x Sigma the pullback of the
incidence locus is delta = sum_k Delta_{k, last}, and extracting the point
class in the last slot of delta^2 must reproduce q*(2 r eta - 2 theta).

Everything is exact Fraction arithmetic on dictionaries keyed by tuples of
basis labels; slow but transparent, which is the point.
"""

from __future__ import annotations

from fractions import Fraction
from math import factorial

__all__ = [
    "tensor_unit",
    "tensor_add",
    "tensor_scale",
    "tensor_mul",
    "slot_class",
    "eta_pull",
    "theta_pull",
    "integrate_sym",
    "diagonal_class",
    "incidence_pull",
    "push_last",
    "oracle_eta_theta_integral",
]

_ONE = ("1",)
_E = ("e",)


def _degree(label) -> int:
    if label == _ONE:
        return 0
    if label == _E:
        return 2
    return 1


def _basis_mul(x, y):
    """Product of two H*(Sigma) basis labels: list of (label, sign)."""
    if x == _ONE:
        return [(y, 1)]
    if y == _ONE:
        return [(x, 1)]
    if x == _E or y == _E:
        return []
    kx, ix = x
    ky, iy = y
    if ix != iy:
        return []
    if kx == "a" and ky == "b":
        return [(_E, 1)]
    if kx == "b" and ky == "a":
        return [(_E, -1)]
    return []


def tensor_unit(slots: int) -> dict:
    return {(_ONE,) * slots: Fraction(1)}


def slot_class(slots: int, k: int, label) -> dict:
    key = tuple(label if i == k else _ONE for i in range(slots))
    return {key: Fraction(1)}


def tensor_add(x: dict, y: dict) -> dict:
    out = dict(x)
    for key, c in y.items():
        out[key] = out.get(key, Fraction(0)) + c
        if out[key] == 0:
            del out[key]
    return out


def tensor_scale(x: dict, c) -> dict:
    c = Fraction(c)
    if c == 0:
        return {}
    return {key: v * c for key, v in x.items()}


def tensor_mul(x: dict, y: dict) -> dict:
    """Graded product with the Koszul sign.

    For pure tensors, (u1 x ... x un)(v1 x ... x vn) picks up
    (-1)^(sum over l < k of |v_l| |u_k|) from moving each v_l left past the
    later u_k.
    """
    out: dict = {}
    for ku, cu in x.items():
        for kv, cv in y.items():
            sign = 1
            for l in range(len(kv)):
                dl = _degree(kv[l])
                if dl % 2 == 0:
                    continue
                crossings = sum(_degree(ku[k]) for k in range(l + 1, len(ku)))
                if (dl * crossings) % 2:
                    sign = -sign
            coeff = cu * cv * sign
            # Slotwise products, distributing over the basis relations.
            terms = [((), 1)]
            for u_lab, v_lab in zip(ku, kv):
                prods = _basis_mul(u_lab, v_lab)
                if not prods:
                    terms = []
                    break
                terms = [
                    (key + (lab,), s * s2) for key, s in terms for lab, s2 in prods
                ]
            for key, s in terms:
                out[key] = out.get(key, Fraction(0)) + coeff * s
                if out[key] == 0:
                    del out[key]
    return out


def eta_pull(r: int, g: int) -> dict:
    """q* of the point-condition class: e in one slot, summed over slots."""
    out: dict = {}
    for k in range(r):
        out = tensor_add(out, slot_class(r, k, _E))
    return out


def theta_pull(r: int, g: int) -> dict:
    """q* of the cup-form class: sum_i (sum_k alpha_i(k)) (sum_l beta_i(l))."""
    out: dict = {}
    for i in range(1, g + 1):
        ai: dict = {}
        bi: dict = {}
        for k in range(r):
            ai = tensor_add(ai, slot_class(r, k, ("a", i)))
            bi = tensor_add(bi, slot_class(r, k, ("b", i)))
        out = tensor_add(out, tensor_mul(ai, bi))
    return out


def integrate_sym(x: dict, r: int) -> Fraction:
    """Integral over Sym^r: top tensor coefficient divided by r!."""
    return x.get((_E,) * r, Fraction(0)) / factorial(r)


def oracle_eta_theta_integral(r: int, g: int, k: int) -> Fraction:
    """int_{Sym^r} eta^(r-k) theta^k by brute-force tensor expansion."""
    if not 0 <= k <= r:
        raise ValueError("theta power must lie between 0 and r")
    acc = tensor_unit(r)
    eta = eta_pull(r, g)
    theta = theta_pull(r, g)
    for _ in range(r - k):
        acc = tensor_mul(acc, eta)
    for _ in range(k):
        acc = tensor_mul(acc, theta)
    return integrate_sym(acc, r)


def diagonal_class(g: int) -> dict:
    """Class of the diagonal in Sigma x Sigma (two slots)."""
    out = tensor_add(slot_class(2, 0, _E), slot_class(2, 1, _E))
    for i in range(1, g + 1):
        cross = {(("b", i), ("a", i)): Fraction(1), (("a", i), ("b", i)): Fraction(-1)}
        out = tensor_add(out, cross)
    return out


def _embed_two_slot(x: dict, slots: int, k: int, last: int) -> dict:
    """Place a two-slot class into slots (k, last) of a larger tensor power.

    Intermediate slots carry 1 (degree 0), so no Koszul signs arise from
    the placement itself.
    """
    out: dict = {}
    for (u, v), c in x.items():
        key = tuple(
            u if i == k else (v if i == last else _ONE) for i in range(slots)
        )
        out[key] = out.get(key, Fraction(0)) + c
    return out


def incidence_pull(r: int, g: int) -> dict:
    """Pullback to Sigma^r x Sigma of the incidence divisor: sum_k Delta(k, last)."""
    slots = r + 1
    diag = diagonal_class(g)
    out: dict = {}
    for k in range(r):
        out = tensor_add(out, _embed_two_slot(diag, slots, k, r))
    return out


def push_last(x: dict) -> dict:
    """Integrate over the last factor: keep terms with e there, drop the slot."""
    out: dict = {}
    for key, c in x.items():
        if key[-1] == _E:
            short = key[:-1]
            out[short] = out.get(short, Fraction(0)) + c
            if out[short] == 0:
                del out[short]
    return out

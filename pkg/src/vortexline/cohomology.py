"""Exact intersection calculus on symmetric products, in the classes eta, theta.

The degree-2 cohomology of Sym^r(Sigma_g) that the volume formulas live in
is spanned by eta (the class of the locus of divisors through a fixed
point) and theta (the cup-product form on the degree-1 part).  This module
does formal polynomial algebra in those two generators with coefficients
that are exact rationals times integer powers of a symbolic pi, so every
prediction is an exact expression; floating point appears only when a
consumer calls .to_float() at the comparison boundary.

Top-degree integrals use the closed rule

    int_{Sym^r} eta^(r-k) theta^k = g! / (g-k)!   for 0 <= k <= min(r, g),
    0 otherwise,

which is classical input rather than something derived here.  It is
therefore gated: the first integration in a process certifies the rule
against the brute-force tensor-algebra oracle (symmetric_oracle) on the
small index range the downstream tests rely on, and refuses to run if any
value disagrees.

The Kahler-class prediction for the vortex moduli space at coupling tau on
area A is

    class = (2 pi tau A - 4 pi^2 r) eta + 4 pi^2 theta,

its top power over r! integrates to the predicted moduli volume, its
formal tau-derivative is the Duistermaat-Heckman slope class 2 pi A eta,
and at tau A = 2 pi r the eta part cancels leaving 4 pi^2 theta.  The same
class is reproduced through the fiberwise route: the two push-pull
brackets (a eta, that is (integral of w) eta, and 2 r eta - 2 theta)
combine as 2 pi (tau A eta - pi (2 r eta - 2 theta)).
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass
from fractions import Fraction

from . import symmetric_oracle as oracle

__all__ = [
    "PiPolynomial",
    "CohClass",
    "IntegralValue",
    "parse_pi_rational",
    "eta",
    "theta",
    "cup",
    "integrate_top",
    "vortex_class",
    "predicted_volume",
    "one_two_bracket_identities",
    "family_class",
    "chern_vertical",
    "dh_slope_class",
    "certify_intersection_rule",
]


class PiPolynomial:
    """Exact value sum_k c_k pi^k with rational c_k and a symbolic pi.

    Supports ring arithmetic with other PiPolynomials, Fractions and ints.
    Immutable; zero coefficients are dropped so equality is structural.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=None):
        if coeffs is None:
            coeffs = {}
        elif isinstance(coeffs, (int, Fraction)):
            coeffs = {0: Fraction(coeffs)}
        clean = {}
        for power, c in coeffs.items():
            c = Fraction(c)
            if c != 0:
                if power < 0:
                    raise ValueError("negative powers of pi are not supported")
                clean[int(power)] = c
        object.__setattr__(self, "coeffs", clean)

    def __setattr__(self, *_):
        raise AttributeError("PiPolynomial is immutable")

    @classmethod
    def pi(cls, power: int = 1, coeff=1) -> "PiPolynomial":
        return cls({power: Fraction(coeff)})

    @staticmethod
    def _coerce(other):
        if isinstance(other, PiPolynomial):
            return other
        if isinstance(other, (int, Fraction)):
            return PiPolynomial(other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out = dict(self.coeffs)
        for p, c in other.coeffs.items():
            out[p] = out.get(p, Fraction(0)) + c
        return PiPolynomial(out)

    __radd__ = __add__

    def __neg__(self):
        return PiPolynomial({p: -c for p, c in self.coeffs.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out: dict = {}
        for p1, c1 in self.coeffs.items():
            for p2, c2 in other.coeffs.items():
                out[p1 + p2] = out.get(p1 + p2, Fraction(0)) + c1 * c2
        return PiPolynomial(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers are not supported")
        out = PiPolynomial(1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))

    def is_zero(self) -> bool:
        return not self.coeffs

    def to_float(self) -> float:
        """Boundary conversion for comparison against numerics."""
        return float(sum(float(c) * math.pi**p for p, c in self.coeffs.items()))

    def __repr__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for p in sorted(self.coeffs, reverse=True):
            c = self.coeffs[p]
            if p == 0:
                parts.append(f"{c}")
            elif p == 1:
                parts.append(f"{c}*pi" if c != 1 else "pi")
            else:
                parts.append(f"{c}*pi^{p}" if c != 1 else f"pi^{p}")
        return " + ".join(parts).replace("+ -", "- ")


_PI_PATTERN = re.compile(
    r"^\s*([+-])?\s*(\d+(?:\.\d+)?(?:/\d+)?)?\s*\*?\s*(pi(?:\^(\d+))?)?\s*$"
)


def parse_pi_rational(text: str) -> PiPolynomial:
    """Parse '8pi', '2.1pi', '3/2 pi', 'pi^2', '-pi', '5' into an exact value.

    Decimal literals become exact fractions (2.1 -> 21/10), so a config
    value like '2.1pi' means exactly 21 pi / 10.
    """
    m = _PI_PATTERN.match(str(text))
    if not m or (m.group(2) is None and m.group(3) is None):
        raise ValueError(f"cannot parse {text!r} as a rational multiple of a pi power")
    try:
        coeff = Fraction(m.group(2)) if m.group(2) else Fraction(1)
    except ZeroDivisionError as exc:
        raise ValueError(f"cannot parse {text!r}: zero denominator") from exc
    if m.group(1) == "-":
        coeff = -coeff
    power = 0
    if m.group(3):
        power = int(m.group(4)) if m.group(4) else 1
    return PiPolynomial({power: coeff})


@dataclass(frozen=True)
class IntegralValue:
    """Exact outcome of a top-degree integration."""

    value: PiPolynomial

    def to_float(self) -> float:
        return self.value.to_float()

    def __repr__(self):
        return f"IntegralValue({self.value!r})"


class CohClass:
    """Polynomial in eta, theta on Sym^r(Sigma_g) with PiPolynomial coefficients.

    terms maps (eta exponent, theta exponent) to coefficients; monomial
    (p, q) has cohomological degree 2(p + q).  Classes on different (r, g)
    never combine.
    """

    __slots__ = ("r", "g", "terms")

    def __init__(self, r: int, g: int, terms=None):
        if r < 1 or g < 0:
            raise ValueError(f"need degree r >= 1 and genus g >= 0, got {(r, g)}")
        clean = {}
        for key, c in (terms or {}).items():
            if not isinstance(c, PiPolynomial):
                c = PiPolynomial(c)
            if not c.is_zero():
                clean[(int(key[0]), int(key[1]))] = c
        object.__setattr__(self, "r", int(r))
        object.__setattr__(self, "g", int(g))
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, *_):
        raise AttributeError("CohClass is immutable")

    def _check(self, other):
        if not isinstance(other, CohClass):
            raise TypeError(f"expected CohClass, got {type(other).__name__}")
        if (self.r, self.g) != (other.r, other.g):
            raise ValueError(
                f"classes live on different spaces: {(self.r, self.g)} vs {(other.r, other.g)}"
            )

    def __add__(self, other):
        self._check(other)
        out = dict(self.terms)
        for key, c in other.terms.items():
            out[key] = out.get(key, PiPolynomial()) + c
        return CohClass(self.r, self.g, out)

    def __neg__(self):
        return CohClass(self.r, self.g, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, factor) -> "CohClass":
        if not isinstance(factor, PiPolynomial):
            factor = PiPolynomial(factor)
        return CohClass(self.r, self.g, {k: c * factor for k, c in self.terms.items()})

    def __eq__(self, other):
        if not isinstance(other, CohClass):
            return NotImplemented
        return (self.r, self.g) == (other.r, other.g) and self.terms == other.terms

    def __hash__(self):
        return hash((self.r, self.g, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return f"CohClass(r={self.r}, g={self.g}, 0)"
        bits = []
        for (p, q) in sorted(self.terms):
            factors = []
            if p:
                factors.append("eta" if p == 1 else f"eta^{p}")
            if q:
                factors.append("theta" if q == 1 else f"theta^{q}")
            mono = "*".join(factors)
            coeff = f"({self.terms[(p, q)]!r})"
            bits.append(f"{coeff}*{mono}" if mono else coeff)
        return f"CohClass(r={self.r}, g={self.g}, " + " + ".join(bits) + ")"


def eta(r: int, g: int) -> CohClass:
    """The point-condition class."""
    return CohClass(r, g, {(1, 0): 1})


def theta(r: int, g: int) -> CohClass:
    """The cup-product-form class."""
    return CohClass(r, g, {(0, 1): 1})


def cup(c1: CohClass, c2: CohClass) -> CohClass:
    """Cup product; commutative since all generators have even degree."""
    c1._check(c2)
    out: dict = {}
    for (p1, q1), a in c1.terms.items():
        for (p2, q2), b in c2.terms.items():
            key = (p1 + p2, q1 + q2)
            out[key] = out.get(key, PiPolynomial()) + a * b
    return CohClass(c1.r, c1.g, out)


def cup_power(c: CohClass, n: int) -> CohClass:
    out = CohClass(c.r, c.g, {(0, 0): 1})
    for _ in range(n):
        out = cup(out, c)
    return out


# ---------------------------------------------------------------------------
# Top-degree integration, gated behind the brute-force oracle.

_RULE_GATE = {"certified": False}
_GATE_CASES = [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2)]
_GATE_GENERA = range(0, 4)


def certify_intersection_rule() -> None:
    """Check the g!/(g-k)! rule against the tensor-algebra oracle.

    Runs the full small-index battery once per process; raises AssertionError
    on any mismatch.  integrate_top calls this lazily before first use.
    """
    if _RULE_GATE["certified"]:
        return
    for (r, k) in _GATE_CASES:
        for g in _GATE_GENERA:
            got = oracle.oracle_eta_theta_integral(r, g, k)
            want = _rule_value(r, g, k)
            if got != want:
                raise AssertionError(
                    f"intersection rule disagrees with oracle at r={r}, g={g}, "
                    f"k={k}: rule {want}, oracle {got}"
                )
    _RULE_GATE["certified"] = True


def _rule_value(r: int, g: int, k: int) -> Fraction:
    if k > min(r, g):
        return Fraction(0)
    return Fraction(math.factorial(g), math.factorial(g - k))


def integrate_top(c: CohClass) -> IntegralValue:
    """Integrate the top-degree part of a class over Sym^r.

    Only monomials with p + q = r contribute; each eta^(r-k) theta^k
    counts g!/(g-k)! (zero past k = g).  The rule is certified against the
    brute-force oracle on first use in a process.
    """
    certify_intersection_rule()
    total = PiPolynomial()
    for (p, q), coeff in c.terms.items():
        if p + q == c.r:
            total = total + coeff * _rule_value(c.r, c.g, q)
    return IntegralValue(total)


# ---------------------------------------------------------------------------
# The class formulas.


def _as_pi_value(x) -> PiPolynomial:
    if isinstance(x, PiPolynomial):
        return x
    if isinstance(x, (int, Fraction)):
        return PiPolynomial(x)
    if isinstance(x, str):
        return parse_pi_rational(x)
    raise TypeError(f"expected an exact value, got {type(x).__name__}")


def vortex_class(tau_area, r: int, g: int) -> CohClass:
    """Moduli Kahler class (2 pi tau A - 4 pi^2 r) eta + 4 pi^2 theta.

    tau_area is exact (PiPolynomial, Fraction, int or a parseable string).
    Below the existence bound the class is still a formal expression; a
    warning is emitted since no moduli space backs it.
    """
    ta = _as_pi_value(tau_area)
    margin = ta - PiPolynomial.pi(1, 2 * r)
    if margin.is_zero() or margin.to_float() <= 0.0:
        warnings.warn(
            f"tau*area = {ta!r} is not above 2 pi r = {PiPolynomial.pi(1, 2 * r)!r}; "
            "the class is formal only",
            stacklevel=2,
        )
    two_pi = PiPolynomial.pi(1, 2)
    return CohClass(
        r,
        g,
        {
            (1, 0): two_pi * ta - PiPolynomial.pi(2, 4 * r),
            (0, 1): PiPolynomial.pi(2, 4),
        },
    )


def predicted_volume(tau_area, r: int, g: int) -> IntegralValue:
    """integrate_top(vortex_class^r / r!): the exact moduli volume prediction."""
    c = cup_power(vortex_class(tau_area, r, g), r)
    return integrate_top(c.scale(Fraction(1, math.factorial(r))))


def one_two_bracket_identities(r: int, g: int, fiber_integral) -> tuple[CohClass, CohClass]:
    """The two push-pull brackets entering the family computation.

    For a fiberwise degree-2 class w with integral a over the fiber, the
    first bracket is a * eta.  The square of the incidence divisor pushed
    down is 2 r eta - 2 theta, independent of the input.
    """
    a = _as_pi_value(fiber_integral)
    first = eta(r, g).scale(a)
    second = CohClass(r, g, {(1, 0): 2 * r, (0, 1): -2})
    return first, second


def family_class(tau, area, r: int, g: int) -> CohClass:
    """The moduli class assembled through the fiberwise brackets.

    2 pi (tau A eta - pi (2 r eta - 2 theta)); reduces identically to
    vortex_class(tau * area, r, g), which the tests assert over a sweep.
    """
    ta = _as_pi_value(tau) * _as_pi_value(area)
    first, second = one_two_bracket_identities(r, g, ta)
    inner = first - second.scale(PiPolynomial.pi(1))
    return inner.scale(PiPolynomial.pi(1, 2))


def chern_vertical(r: int, g: int) -> CohClass:
    """First Chern class of the vertical tangent bundle: (1 - g + r) eta - theta."""
    return CohClass(r, g, {(1, 0): 1 - g + r, (0, 1): -1})


def dh_slope_class(r: int, g: int, area) -> CohClass:
    """d(class)/d(tau) = 2 pi A eta, checked against a formal difference quotient."""
    a = _as_pi_value(area)
    slope = eta(r, g).scale(PiPolynomial.pi(1, 2) * a)
    # Linearity in tau makes the unit difference quotient exact.  The two
    # formal evaluation points may sit below the existence bound; that
    # warning is irrelevant to the derivative check.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        diff = vortex_class(a * 2, r, g) - vortex_class(a * 1, r, g)
    if diff != slope:
        raise AssertionError("slope class disagrees with the formal tau-derivative")
    return slope

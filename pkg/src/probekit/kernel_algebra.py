r"""Exact algebra of the derivative polynomials of :math:`1/\sqrt{s^2+t^2}`.

For every order ``m`` there is a polynomial ``P_m(s, t)`` with

.. math::

    \partial_s^m \frac{1}{\sqrt{s^2+t^2}} = \frac{P_m(s,t)}{(s^2+t^2)^{(2m+1)/2}}.

``P_{2k}`` only carries monomials ``s^{2i} t^{2(k-i)}`` and ``P_{2k+1}`` only
``s^{2i+1} t^{2(k-i)}``, so one list of ``k+1`` rationals describes each
polynomial.  Everything here is done with :class:`fractions.Fraction` so the
identities are checked without tolerance; the only floating point routine is
:func:`eval_derivative`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .errors import DomainError

__all__ = [
    "SingularityPolynomial",
    "IdentityReport",
    "binom",
    "coeff_closed_form",
    "p_poly",
    "recurrence_2_11",
    "recurrence_2_12",
    "recurrence_2_13",
    "recurrence_families",
    "recurrence_agreement",
    "recurrences_2_14_to_2_17",
    "identities_2_9_2_10",
    "alt_sum_identity",
    "eval_derivative",
]


def binom(n: int, k: int) -> int:
    """Binomial coefficient with ``C(n, k) = 0`` outside ``0 <= k <= n``."""
    if k < 0 or n < 0 or k > n:
        return 0
    return math.comb(n, k)


@dataclass(frozen=True)
class SingularityPolynomial:
    """``P_m`` stored by its parity-reduced coefficient list.

    ``coeffs[i]`` multiplies ``s^{2i} t^{2(h-i)}`` for even ``order`` and
    ``s^{2i+1} t^{2(h-i)}`` for odd ``order``, where ``h = order // 2``.
    """

    order: int
    coeffs: tuple[Fraction, ...]

    def __post_init__(self):
        if self.order < 0:
            raise DomainError(f"order must be non-negative, got {self.order}")
        if len(self.coeffs) != self.order // 2 + 1:
            raise DomainError(
                f"order {self.order} needs {self.order // 2 + 1} coefficients, "
                f"got {len(self.coeffs)}"
            )
        object.__setattr__(self, "coeffs", tuple(Fraction(c) for c in self.coeffs))

    @property
    def half(self) -> int:
        return self.order // 2

    @property
    def parity(self) -> str:
        return "even" if self.order % 2 == 0 else "odd"

    def monomial(self, i: int) -> tuple[int, int]:
        """Exponents ``(a, b)`` of ``s^a t^b`` carried by ``coeffs[i]``."""
        a = 2 * i + (self.order % 2)
        return a, 2 * (self.half - i)

    def terms(self) -> dict[tuple[int, int], Fraction]:
        return {self.monomial(i): c for i, c in enumerate(self.coeffs) if c != 0}

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def leading(self) -> Fraction:
        """Coefficient of the pure ``s^order`` monomial."""
        return self.coeffs[-1]

    @classmethod
    def from_terms(cls, order: int, terms: dict[tuple[int, int], Fraction]):
        """Build from a general term dict, rejecting monomials of wrong shape."""
        h = order // 2
        coeffs = [Fraction(0)] * (h + 1)
        for (a, b), c in terms.items():
            if c == 0:
                continue
            if a + b != order:
                raise DomainError(f"monomial s^{a} t^{b} has wrong degree for order {order}")
            if a % 2 != order % 2 or b % 2:
                raise DomainError(f"monomial s^{a} t^{b} breaks the parity of order {order}")
            coeffs[(a - order % 2) // 2] += c
        return cls(order, tuple(coeffs))

    def __call__(self, s, t):
        """Evaluate with whatever number type ``s`` and ``t`` carry."""
        s2, t2 = s * s, t * t
        odd = self.order % 2
        total = 0
        for i, c in enumerate(self.coeffs):
            total += c * s2**i * t2 ** (self.half - i)
        return total * s if odd else total

    def __str__(self):
        parts = []
        for (a, b), c in sorted(self.terms().items(), reverse=True):
            mono = "*".join(
                f"{v}^{e}" if e > 1 else v for v, e in (("s", a), ("t", b)) if e
            )
            parts.append(f"{c}{'*' + mono if mono else ''}")
        return " + ".join(parts) if parts else "0"


# general bivariate helpers (dicts keyed by exponent pairs)

def _add(p, q, scale=1):
    out = dict(p)
    for k, v in q.items():
        out[k] = out.get(k, 0) + scale * v
    return {k: v for k, v in out.items() if v != 0}


def _mul_monomial(p, a, b, c=1):
    return {(i + a, j + b): c * v for (i, j), v in p.items()}


def _ds(p):
    return {(i - 1, j): i * v for (i, j), v in p.items() if i > 0}


def _times_r2(p):
    return _add(_mul_monomial(p, 2, 0), _mul_monomial(p, 0, 2))


def coeff_closed_form(parity: str, m: int, i: int) -> Fraction:
    """Closed-form coefficient ``a_{2m,2i}`` (even) or ``a_{2m+1,2i+1}`` (odd)."""
    if m < 0 or not 0 <= i <= m:
        raise DomainError(f"need 0 <= i <= m with m >= 0, got m={m}, i={i}")
    scale = Fraction(2) ** (2 * i - 2 * m)
    if parity == "even":
        sign = (-1) ** (m - i)
        return sign * scale * math.factorial(2 * m) * binom(2 * m, m - i) * binom(m + i, m - i)
    if parity == "odd":
        sign = (-1) ** (m - i + 1)
        return (
            sign * scale * math.factorial(2 * m + 1)
            * binom(2 * m + 1, m - i) * binom(m + i + 1, m - i)
        )
    raise DomainError(f"parity must be 'even' or 'odd', got {parity!r}")


def _a(order: int, power: int) -> Fraction:
    """Coefficient of ``s^power`` inside ``P_order`` (zero when absent)."""
    if order < 0 or power < 0 or power > order or (power - order) % 2:
        return Fraction(0)
    h = order // 2
    if order % 2 == 0:
        return coeff_closed_form("even", h, power // 2)
    return coeff_closed_form("odd", h, (power - 1) // 2)


@lru_cache(maxsize=None)
def p_poly(m: int) -> SingularityPolynomial:
    """``P_m`` assembled from the closed-form coefficients."""
    if m < 0:
        raise DomainError(f"order must be non-negative, got {m}")
    parity = "even" if m % 2 == 0 else "odd"
    h = m // 2
    return SingularityPolynomial(m, tuple(coeff_closed_form(parity, h, i) for i in range(h + 1)))


def recurrence_2_11(p: SingularityPolynomial) -> SingularityPolynomial:
    """Step ``P_{l+1} = (s^2+t^2) dP_l/ds - (2l+1) s P_l``."""
    l = p.order
    terms = p.terms()
    nxt = _add(_times_r2(_ds(terms)), _mul_monomial(terms, 1, 0), scale=-(2 * l + 1))
    return SingularityPolynomial.from_terms(l + 1, nxt)


def recurrence_2_12(p_m, p_m1, p_m2=None) -> SingularityPolynomial:
    """Residual of ``P_m + (2m-1) s P_{m-1} + (m-1)^2 (s^2+t^2) P_{m-2}``.

    Zero for the true sequence.  Needs ``m >= 2`` and consecutive orders.
    """
    m = p_m.order
    if p_m2 is None or m < 2:
        raise DomainError("the three-term relation needs P_m, P_{m-1}, P_{m-2} with m >= 2")
    if p_m1.order != m - 1 or p_m2.order != m - 2:
        raise DomainError(
            f"orders must be consecutive, got {p_m.order}, {p_m1.order}, {p_m2.order}"
        )
    res = _add(p_m.terms(), _mul_monomial(p_m1.terms(), 1, 0), scale=2 * m - 1)
    res = _add(res, _times_r2(p_m2.terms()), scale=(m - 1) ** 2)
    return SingularityPolynomial.from_terms(m, res)


def recurrence_2_13(p: SingularityPolynomial) -> SingularityPolynomial:
    """Lower the order with ``dP_m/ds = -m^2 P_{m-1}``."""
    m = p.order
    if m < 1:
        raise DomainError("P_0 has no predecessor")
    lower = {k: Fraction(v, -(m * m)) for k, v in _ds(p.terms()).items()}
    return SingularityPolynomial.from_terms(m - 1, lower)


def recurrence_agreement(m_max: int) -> list[tuple[int, bool, bool]]:
    """``(m, iterated_step == closed_form, lowered_from_m+1 == closed_form)`` for ``m <= m_max``."""
    if m_max < 0:
        raise DomainError(f"order must be non-negative, got {m_max}")
    out = []
    it = SingularityPolynomial(0, (Fraction(1),))
    for m in range(m_max + 1):
        if m:
            it = recurrence_2_11(it)
        ref = p_poly(m)
        out.append((m, it == ref, recurrence_2_13(p_poly(m + 1)) == ref))
    return out


def recurrence_families(m: int) -> dict[str, bool]:
    """Check the coefficient-level recurrences that apply at ``m``.

    ``even_two_term`` and ``odd_two_term`` express a row through both
    neighbours of the previous row and need ``m >= 2``; ``even_ratio`` and
    ``odd_ratio`` link single entries and need ``m >= 1``.  Families that do
    not apply at ``m`` are omitted.
    """
    out = {}
    if m >= 2:
        ok_even = True
        for i in range(m + 1):
            if i == 0:
                rhs = _a(2 * m - 1, 1)
            elif i == m:
                rhs = -2 * m * _a(2 * m - 1, 2 * m - 1)
            else:
                rhs = (2 * i - 4 * m) * _a(2 * m - 1, 2 * i - 1) + (2 * i + 1) * _a(2 * m - 1, 2 * i + 1)
            ok_even &= _a(2 * m, 2 * i) == rhs
        ok_odd = True
        for i in range(m + 1):
            if i == m:
                rhs = -(2 * m + 1) * _a(2 * m, 2 * m)
            else:
                rhs = (2 * i - 4 * m - 1) * _a(2 * m, 2 * i) + (2 * i + 2) * _a(2 * m, 2 * i + 2)
            ok_odd &= _a(2 * m + 1, 2 * i + 1) == rhs
        out["even_two_term"], out["odd_two_term"] = ok_even, ok_odd
    if m >= 1:
        out["even_ratio"] = all(
            _a(2 * m, 2 * i) == Fraction(-(2 * m) ** 2, 2 * i) * _a(2 * m - 1, 2 * i - 1)
            for i in range(1, m + 1)
        )
        out["odd_ratio"] = all(
            _a(2 * m + 1, 2 * i + 1) == Fraction(-(2 * m + 1) ** 2, 2 * i + 1) * _a(2 * m, 2 * i)
            for i in range(m + 1)
        )
    return out


def recurrences_2_14_to_2_17(m: int) -> bool:
    """True iff every coefficient recurrence applicable at ``m`` holds exactly."""
    return all(recurrence_families(m).values())


@dataclass(frozen=True)
class IdentityReport:
    """Both sides of the two weighted-sum identities at one order.

    ``mid_29``/``mid_210`` hold the odd-coefficient middle members of each
    chained equality.
    """

    order: int
    lhs_29: Fraction
    mid_29: Fraction
    rhs_29: Fraction
    lhs_210: Fraction
    mid_210: Fraction
    rhs_210: Fraction

    @property
    def holds(self) -> tuple[bool, bool]:
        return (
            self.lhs_29 == self.mid_29 == self.rhs_29,
            self.lhs_210 == self.mid_210 == self.rhs_210,
        )


def identities_2_9_2_10(m: int) -> IdentityReport:
    """Evaluate both sides of the binomially weighted coefficient sums."""
    if m < 1:
        raise DomainError(f"identities are stated for m >= 1, got {m}")
    even = [coeff_closed_form("even", m, i) for i in range(m + 1)]
    odd = [coeff_closed_form("odd", m, i) for i in range(m + 1)]
    lhs29 = sum(Fraction(a, binom(2 * m - 1, m - i)) for i, a in enumerate(even))
    mid29 = Fraction(-2, 2 * m + 1) * sum(Fraction(a, binom(2 * m, m - i)) for i, a in enumerate(odd))
    rhs29 = Fraction(math.factorial(2 * m), 2 ** (2 * m - 1))
    lhs210 = (m + 1) * sum(Fraction(a, binom(2 * m, m - i)) for i, a in enumerate(even))
    mid210 = -sum(Fraction(a, binom(2 * m + 1, m - i)) for i, a in enumerate(odd))
    rhs210 = Fraction(math.factorial(2 * m + 2), 2 ** (2 * m + 1))
    return IdentityReport(m, lhs29, mid29, rhs29, lhs210, mid210, rhs210)


def alt_sum_identity(m: int, i: int) -> bool:
    """Check ``sum_l (-1)^l C(m-i, l)/(m+i+l) == 1/(2m C(2m-1, m-i))`` exactly."""
    if m < 1 or not 0 <= i <= m:
        raise DomainError(f"need m >= 1 and 0 <= i <= m, got m={m}, i={i}")
    lhs = sum(Fraction((-1) ** l * binom(m - i, l), m + i + l) for l in range(m - i + 1))
    return lhs == Fraction(1, 2 * m * binom(2 * m - 1, m - i))


@lru_cache(maxsize=None)
def _float_coeffs(m: int) -> tuple[float, ...]:
    return tuple(float(c) for c in p_poly(m).coeffs)


def eval_derivative(m: int, s: float, t: float) -> float:
    r"""Floating value of :math:`\partial_s^m (s^2+t^2)^{-1/2}`."""
    if s == 0 and t == 0:
        raise DomainError("the kernel is singular at the origin")
    r2 = s * s + t * t
    coeffs = _float_coeffs(m)
    h = m // 2
    # scaled monomials keep large orders inside the float range
    u, v = s * s / r2, t * t / r2
    total = sum(c * u**i * v ** (h - i) for i, c in enumerate(coeffs))
    if m % 2:
        total *= s / math.sqrt(r2)
    return total / r2 ** ((m + 1) / 2)

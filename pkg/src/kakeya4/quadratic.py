"""Exact arithmetic in real quadratic fields, small rational maps, and
fixed-point extraction.

The self-improvement analysis bottoms out in numbers of the form
a + b*sqrt(d) with rational a, b and a squarefree integer d >= 0. This
module provides:

* `QuadraticNumber`: exact field arithmetic, comparisons decided by
  conjugate sign analysis (never by floating point), and decimal rendering
  through integer square roots;
* `Polynomial` over the rationals (degree <= 2 is all the callers need,
  but evaluation and gcd work generally);
* `RationalMap`: quotient of two polynomials of degree <= 2 in lowest
  terms, with exact evaluation at rationals and quadratic numbers;
* `fixed_points`: clears the fixed-point equation to a polynomial of
  degree <= 2 and solves it exactly, reporting the discriminant, both
  field roots, and any candidates discarded because they are poles;
* `iterate`: exact functional iteration with an optional controlled
  round-up onto a dyadic grid so denominators stay bounded; every rounding
  step is certified in exact arithmetic (the rounded value stays at or
  above the true image and below the previous iterate).

Error paths: division by zero raises ZeroDivisionError; mixing two
different irrational radicands raises FieldMismatch (there is no implicit
embedding into a biquadratic field).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

Rational = Union[int, Fraction]
Scalar = Union[int, Fraction, "QuadraticNumber"]


class FieldMismatch(ArithmeticError):
    """Arithmetic attempted between sqrt(d1) and sqrt(d2) with d1 != d2."""


class DomainExit(ArithmeticError):
    """An iteration left the map's domain (hit a pole).

    Carries the trajectory accumulated up to the last valid iterate in
    `partial` so callers can inspect how far the orbit got.
    """

    def __init__(self, message: str, partial: "Trajectory"):
        super().__init__(message)
        self.partial = partial


def squarefree_decomposition(n: int) -> tuple[int, int]:
    """Write n = s * k*k with s squarefree; returns (s, k). Needs n >= 0."""
    if n < 0:
        raise ValueError("negative radicand has no real square root")
    if n == 0:
        return 0, 1
    s, k = 1, 1
    p = 2
    while p * p <= n:
        if n % p == 0:
            count = 0
            while n % p == 0:
                n //= p
                count += 1
            if count % 2:
                s *= p
            k *= p ** (count // 2)
        p += 1 if p == 2 else 2
    return s * n, k


def sqrt_fraction_floor(d: int, digits: int) -> Fraction:
    """Largest multiple of 10^-digits at most sqrt(d), via math.isqrt."""
    scale = 10 ** digits
    return Fraction(math.isqrt(d * scale * scale), scale)


@functools.total_ordering
class QuadraticNumber:
    """Exact element a + b*sqrt(d) of a real quadratic field.

    Normal form: d squarefree; if b == 0 then d == 0; square factors of a
    requested radicand are absorbed into b. Comparisons are exact: the sign
    of a + b*sqrt(d) is decided by comparing a*a against b*b*d with the
    appropriate signs, so no floating point is ever consulted.
    """

    __slots__ = ("_a", "_b", "_d")

    def __init__(self, a: Rational = 0, b: Rational = 0, d: int = 0) -> None:
        a, b = Fraction(a), Fraction(b)
        s, k = squarefree_decomposition(int(d))
        b *= k
        if s in (0, 1):
            a += b * s  # sqrt(0) = 0, sqrt(1) = 1
            b = Fraction(0)
            s = 0
        if b == 0:
            s = 0
        self._a, self._b, self._d = a, b, s

    # --- accessors ---

    @property
    def rational_part(self) -> Fraction:
        return self._a

    @property
    def radical_part(self) -> Fraction:
        return self._b

    @property
    def radicand(self) -> int:
        return self._d

    @property
    def is_rational(self) -> bool:
        return self._b == 0

    def as_fraction(self) -> Fraction:
        if not self.is_rational:
            raise ValueError(f"{self} is irrational")
        return self._a

    # --- coercion helpers ---

    @staticmethod
    def _coerce(value: Scalar) -> "QuadraticNumber":
        if isinstance(value, QuadraticNumber):
            return value
        if isinstance(value, (int, Fraction)):
            return QuadraticNumber(value)
        return NotImplemented  # type: ignore[return-value]

    def _join_radicand(self, other: "QuadraticNumber") -> int:
        if self._d and other._d and self._d != other._d:
            raise FieldMismatch(
                f"cannot mix sqrt({self._d}) with sqrt({other._d})")
        return self._d or other._d

    # --- field operations ---

    def __add__(self, other: Scalar) -> "QuadraticNumber":
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        d = self._join_radicand(o)
        return QuadraticNumber(self._a + o._a, self._b + o._b, d)

    __radd__ = __add__

    def __neg__(self) -> "QuadraticNumber":
        return QuadraticNumber(-self._a, -self._b, self._d)

    def __sub__(self, other: Scalar) -> "QuadraticNumber":
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self.__add__(-o)

    def __rsub__(self, other: Scalar) -> "QuadraticNumber":
        return (-self).__add__(other)

    def __mul__(self, other: Scalar) -> "QuadraticNumber":
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        d = self._join_radicand(o)
        return QuadraticNumber(self._a * o._a + self._b * o._b * d,
                               self._a * o._b + self._b * o._a, d)

    __rmul__ = __mul__

    def conjugate(self) -> "QuadraticNumber":
        return QuadraticNumber(self._a, -self._b, self._d)

    def norm(self) -> Fraction:
        """Field norm a*a - b*b*d (product with the conjugate)."""
        return self._a * self._a - self._b * self._b * self._d

    def __truediv__(self, other: Scalar) -> "QuadraticNumber":
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if o._a == 0 and o._b == 0:
            raise ZeroDivisionError("division by zero quadratic number")
        d = self._join_radicand(o)
        n = o.norm()
        num = self * o.conjugate()
        return QuadraticNumber(num._a / n, num._b / n, d)

    def __rtruediv__(self, other: Scalar) -> "QuadraticNumber":
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return o.__truediv__(self)

    def __pow__(self, exponent: int) -> "QuadraticNumber":
        if not isinstance(exponent, int):
            return NotImplemented
        if exponent < 0:
            return QuadraticNumber(1).__truediv__(self) ** (-exponent)
        result = QuadraticNumber(1)
        base = self
        e = exponent
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    # --- exact sign and order ---

    def sign(self) -> int:
        """Exact sign in {-1, 0, 1}, decided by integer comparisons."""
        a, b, d = self._a, self._b, self._d
        if b == 0:
            return (a > 0) - (a < 0)
        if a == 0:
            return 1 if b > 0 else -1
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        # opposite signs: |a| vs |b|*sqrt(d), squared
        lhs, rhs = a * a, b * b * d
        if lhs == rhs:
            return 0
        bigger_is_a = lhs > rhs
        return (1 if bigger_is_a else -1) if a > 0 else \
               (-1 if bigger_is_a else 1)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, float):
            return False
        o = self._coerce(other)  # type: ignore[arg-type]
        if o is NotImplemented:
            return NotImplemented
        try:
            diff = self - o
        except FieldMismatch:
            return False
        return diff._a == 0 and diff._b == 0

    def __lt__(self, other: Scalar) -> bool:
        return (self - self._coerce(other)).sign() < 0

    def __hash__(self) -> int:
        if self._b == 0:
            return hash(self._a)
        return hash((self._a, self._b, self._d))

    def __bool__(self) -> bool:
        return self._a != 0 or self._b != 0

    # --- rendering ---

    def approximate(self, digits: int) -> Fraction:
        """Rational approximation within 10^-digits of the exact value."""
        if self._b == 0:
            return self._a
        guard = digits + len(str(self._b.numerator)) + 5
        root = sqrt_fraction_floor(self._d, guard)
        return self._a + self._b * root

    def decimal(self, sig: int = 10) -> str:
        """Decimal string with `sig` significant digits (round half even)."""
        approx = self.approximate(sig + 15)
        return format_significant(approx, sig)

    def __str__(self) -> str:
        if self._b == 0:
            return str(self._a)
        tail = f"sqrt({self._d})"
        if self._b != 1:
            tail = f"{self._b}*{tail}"
        if self._a == 0:
            return tail
        op = "+" if self._b > 0 else "-"
        mag = tail if self._b > 0 else tail.replace("-", "", 1)
        return f"{self._a} {op} {mag}"

    def __repr__(self) -> str:
        return (f"QuadraticNumber({self._a!r}, {self._b!r}, {self._d})")

    def to_dict(self) -> dict:
        return {"rational": str(self._a), "radical": str(self._b),
                "radicand": self._d, "decimal": self.decimal(12)}


def format_significant(value: Fraction, sig: int) -> str:
    """Fixed-point decimal with `sig` significant digits, half-even ties."""
    if sig < 1:
        raise ValueError("need at least one significant digit")
    if value == 0:
        return "0"
    sign = "-" if value < 0 else ""
    mag = -value if value < 0 else value
    # find e with 10^e <= mag < 10^(e+1)
    e = len(str(mag.numerator)) - len(str(mag.denominator))
    while 10 ** e > mag:
        e -= 1
    while 10 ** (e + 1) <= mag:
        e += 1
    places = sig - 1 - e
    scaled = round(mag * Fraction(10) ** places)  # Fraction: half-even
    digits = str(scaled)
    if len(digits) > sig:  # rounding carried into a new leading digit
        e += 1
        places -= 1
        scaled = round(mag * Fraction(10) ** places)
        digits = str(scaled)
    if places <= 0:
        return sign + digits + "0" * (-places)
    if len(digits) <= places:
        digits = "0" * (places - len(digits) + 1) + digits
    return sign + digits[:-places] + "." + digits[-places:]


# =========================================================================
# polynomials and rational maps
# =========================================================================


class Polynomial:
    """Dense univariate polynomial over the rationals, ascending coeffs."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[Rational]) -> None:
        cs = [Fraction(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.coeffs = tuple(cs)

    @property
    def degree(self) -> int:
        """Degree, with the zero polynomial assigned -1."""
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def __call__(self, x: Scalar):
        result: Scalar = Fraction(0)
        for c in reversed(self.coeffs):
            result = result * x + c
        return result

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __mul__(self, other: "Polynomial | Rational") -> "Polynomial":
        if isinstance(other, (int, Fraction)):
            return Polynomial([c * other for c in self.coeffs])
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1 or 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Polynomial(out)

    __rmul__ = __mul__

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        out = [Fraction(0)] * n
        for i, c in enumerate(self.coeffs):
            out[i] += c
        for i, c in enumerate(other.coeffs):
            out[i] -= c
        return Polynomial(out)

    def shift_mul_x(self) -> "Polynomial":
        """Multiply by the variable."""
        if self.is_zero:
            return self
        return Polynomial((Fraction(0),) + self.coeffs)

    def monic(self) -> "Polynomial":
        if self.is_zero:
            return self
        lead = self.coeffs[-1]
        return Polynomial([c / lead for c in self.coeffs])

    def divmod(self, other: "Polynomial") -> tuple["Polynomial", "Polynomial"]:
        if other.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        quot = [Fraction(0)] * max(len(rem) - len(other.coeffs) + 1, 1)
        d, lead = other.degree, other.coeffs[-1]
        while len(rem) - 1 >= d and any(c != 0 for c in rem):
            while rem and rem[-1] == 0:
                rem.pop()
            if len(rem) - 1 < d:
                break
            shift = len(rem) - 1 - d
            factor = rem[-1] / lead
            quot[shift] += factor
            for i, c in enumerate(other.coeffs):
                rem[shift + i] -= factor * c
        return Polynomial(quot), Polynomial(rem)

    def gcd(self, other: "Polynomial") -> "Polynomial":
        a, b = self, other
        while not b.is_zero:
            a, b = b, a.divmod(b)[1]
        return a.monic() if not a.is_zero else a

    def __str__(self) -> str:
        if self.is_zero:
            return "0"
        parts = []
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            if i == 0:
                parts.append(str(c))
            elif i == 1:
                parts.append(f"{c}*x" if c != 1 else "x")
            else:
                parts.append(f"{c}*x^{i}" if c != 1 else f"x^{i}")
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self) -> str:
        return f"Polynomial({list(self.coeffs)!r})"


def solve_quadratic(poly: Polynomial) -> tuple[Fraction, tuple[QuadraticNumber, ...]]:
    """Exact real roots of a polynomial of degree <= 2.

    Returns (discriminant, roots); the discriminant is 0 for degree < 2.
    Degree-2 polynomials with negative discriminant report no real roots.
    """
    if poly.degree > 2:
        raise ValueError(f"degree {poly.degree} > 2 is outside this solver")
    if poly.is_zero:
        raise ValueError("zero polynomial: every point is a root")
    if poly.degree == 0:
        return Fraction(0), ()
    if poly.degree == 1:
        c0, c1 = poly.coeffs
        return Fraction(0), (QuadraticNumber(-c0 / c1),)
    c0, c1, c2 = poly.coeffs
    disc = c1 * c1 - 4 * c2 * c0
    if disc < 0:
        return disc, ()
    # sqrt(disc) = (p/q) * sqrt(s) with s squarefree
    sn, kn = squarefree_decomposition(disc.numerator)
    sd, kd = squarefree_decomposition(disc.denominator)
    # sqrt(n/d) = sqrt(n*d)/d; keep exactness via squarefree parts
    s, k = squarefree_decomposition(sn * sd)
    root_of_disc = QuadraticNumber(0, Fraction(kn * kd * k,
                                               disc.denominator), s)
    roots = tuple(sorted(
        (QuadraticNumber(-c1) + sgn * root_of_disc) / (2 * c2)
        for sgn in (1, -1)))
    if roots[0] == roots[1]:
        roots = roots[:1]
    return disc, roots


@dataclass(frozen=True)
class FixedPointReport:
    """Exact solution of map(x) == x after clearing denominators."""

    cleared: Polynomial
    discriminant: Fraction
    fixed_points: tuple[QuadraticNumber, ...]
    poles_excluded: tuple[QuadraticNumber, ...]
    everywhere_fixed: bool = False

    def to_dict(self) -> dict:
        return {
            "cleared_coefficients": [str(c) for c in self.cleared.coeffs],
            "discriminant": str(self.discriminant),
            "fixed_points": [x.to_dict() for x in self.fixed_points],
            "poles_excluded": [x.to_dict() for x in self.poles_excluded],
            "everywhere_fixed": self.everywhere_fixed,
        }


class RationalMap:
    """Quotient of two rational polynomials of degree <= 2, lowest terms."""

    __slots__ = ("num", "den")

    def __init__(self, num: Polynomial | Sequence[Rational],
                 den: Polynomial | Sequence[Rational]) -> None:
        num = num if isinstance(num, Polynomial) else Polynomial(num)
        den = den if isinstance(den, Polynomial) else Polynomial(den)
        if den.is_zero:
            raise ZeroDivisionError("rational map with zero denominator")
        if num.degree > 2 or den.degree > 2:
            raise ValueError("numerator and denominator must have degree <= 2")
        common = num.gcd(den)
        if not num.is_zero and common.degree > 0:
            num = num.divmod(common)[0]
            den = den.divmod(common)[0]
        lead = den.coeffs[-1]
        self.num = num * (1 / lead)
        self.den = den * (1 / lead)

    def __call__(self, x: Scalar):
        den_val = self.den(x)
        is_zero = (den_val.sign() == 0 if isinstance(den_val, QuadraticNumber)
                   else den_val == 0)
        if is_zero:
            raise ZeroDivisionError(f"pole of the map at x = {x}")
        return self.num(x) / den_val

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RationalMap):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self) -> int:
        return hash((self.num, self.den))

    def __str__(self) -> str:
        return f"({self.num}) / ({self.den})"

    def fixed_points(self) -> FixedPointReport:
        """Solve map(x) == x exactly via the cleared polynomial num - x*den.

        The cleared polynomial must have degree <= 2 (guaranteed when the
        denominator is linear, which covers every map used here). Roots at
        which the denominator vanishes are reported separately, not as
        fixed points.
        """
        cleared = self.num - self.den.shift_mul_x()
        if cleared.is_zero:
            return FixedPointReport(cleared, Fraction(0), (), (),
                                    everywhere_fixed=True)
        if cleared.degree > 2:
            raise ValueError(
                f"cleared fixed-point equation has degree {cleared.degree}; "
                f"only degrees <= 2 are supported")
        disc, roots = solve_quadratic(cleared)
        genuine, poles = [], []
        for r in roots:
            den_val = self.den(r)
            sign = (den_val.sign() if isinstance(den_val, QuadraticNumber)
                    else ((den_val > 0) - (den_val < 0)))
            (poles if sign == 0 else genuine).append(r)
        return FixedPointReport(cleared, disc, tuple(genuine), tuple(poles))


# =========================================================================
# iteration
# =========================================================================


@dataclass
class Trajectory:
    """Record of an exact functional iteration."""

    points: list[Fraction]
    converged: bool
    stop_reason: str
    rounded_steps: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.points) - 1

    @property
    def monotone_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.points, self.points[1:]))

    def to_dict(self) -> dict:
        return {
            "points": [str(p) for p in self.points],
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "monotone_decreasing": self.monotone_decreasing,
            "rounded_steps": self.rounded_steps,
        }


def ceil_to_dyadic(x: Fraction, bits: int) -> Fraction:
    """Smallest multiple of 2^-bits that is >= x."""
    scale = 1 << bits
    num = x.numerator * scale
    q, r = divmod(num, x.denominator)
    return Fraction(q + (1 if r else 0), scale)


def exact_sign(value: Scalar) -> int:
    """Sign of a Fraction/int/QuadraticNumber, decided exactly."""
    if isinstance(value, QuadraticNumber):
        return value.sign()
    return (value > 0) - (value < 0)


def iterate(map_: RationalMap, x0: Rational, *, tol: Rational = Fraction(1, 10 ** 12),
            max_iter: int = 10_000,
            denominator_bits: int | None = None,
            floor: Scalar | None = None,
            fixed_point: Scalar | None = None) -> Trajectory:
    """Iterate x -> map(x) exactly until a stopping rule fires.

    Stopping: with `fixed_point` given, stop once |x_k - fixed_point| < tol,
    the distance evaluated exactly (sign analysis, no floats). Otherwise
    stop once successive points are within tol.

    With `denominator_bits` set, each exact image is rounded UP to the
    dyadic grid of that resolution whenever its denominator is wider. The
    rounding is certified on the spot: the rounded value must stay below
    the previous iterate (monotone decreasing trajectories only) and, when
    `floor` is given, strictly above it. Designed for trajectories that
    decrease toward a fixed point from above; rounding up can only slow
    convergence, never overshoot the limit.

    Raises DomainExit (carrying the partial trajectory) if the orbit hits
    a pole of the map, and ArithmeticError if a certification fails.
    """
    x = Fraction(x0)
    tol = Fraction(tol)
    points = [x]
    rounded = 0

    def near_target(value: Fraction) -> bool:
        # |value - fixed_point| < tol, decided exactly.
        return (exact_sign(value - fixed_point - tol) < 0
                and exact_sign(value - fixed_point + tol) > 0)

    if fixed_point is not None and near_target(x):
        return Trajectory(points, True, "within tol of the fixed point",
                          rounded)
    for _ in range(max_iter):
        try:
            image = map_(x)
        except ZeroDivisionError as exc:
            raise DomainExit(
                f"iterate hit a pole of the map at x = {x}",
                Trajectory(points, False, "pole reached", rounded)) from exc
        if not isinstance(image, Fraction):
            image = image.as_fraction()
        nxt = image
        if (denominator_bits is not None
                and nxt.denominator.bit_length() > denominator_bits):
            nxt = ceil_to_dyadic(nxt, denominator_bits)
            rounded += 1
            if nxt >= x and image < x:
                raise ArithmeticError(
                    "rounding grid too coarse: rounded iterate failed to "
                    "stay below the previous point")
        if floor is not None and exact_sign(floor - nxt) >= 0:
            raise ArithmeticError(
                "iterate crossed the certified floor; rounding or the "
                "map itself is inconsistent with the claimed bracket")
        points.append(nxt)
        if fixed_point is not None:
            if near_target(nxt):
                return Trajectory(points, True,
                                  "within tol of the fixed point", rounded)
        elif abs(nxt - x) < tol:
            return Trajectory(points, True, "successive points within tol",
                              rounded)
        x = nxt
    return Trajectory(points, False, "max_iter reached", rounded)

"""Exact calculus of one-monomial power bounds.

Everything here manipulates statements of the shape

    quantity <=~ c * prod_i sym_i ^ e_i      (or >=~ for lower bounds)

where the exponents e_i are exact rationals and the unspecified constant c
is tracked only through a coarse loss class (sharp constant, polylog factor,
or an arbitrarily small epsilon power). The operations are the standard
moves of exponent bookkeeping:

* interpolate  -- weighted geometric mean of two bounds on the same quantity,
                  which is a convex combination in exponent space;
* solve_weight -- pick the interpolation weight that hits a target exponent
                  on one symbol;
* eliminate    -- interpolate so a chosen symbol's exponent becomes exactly 0;
* compose      -- substitute one bound into another where the inner bound's
                  quantity appears with positive exponent;
* substitute_rescale -- replace a symbol by a monomial in other symbols
                  (change of scale / instantiation, an exact rewrite);
* drop_bounded -- delete a symbol factor whose sign and domain make the
                  deleted factor <= 1 (upper bounds) or >= 1 (lower bounds);
* double_count -- swap between "union volume is at least V" and "average
                  multiplicity is at most lam * mass / V", an involution.

Design notes:

* exponents are `fractions.Fraction` throughout; no floats enter any
  computation, only the optional decimal renderings;
* exponent vectors never store zero entries, so equality of bounds is
  equality of dicts;
* loss classes only widen: every operation returns the max of its inputs'
  classes (and drop/double-count preserve the class);
* unsound moves raise `DirectionUnsound` rather than silently producing a
  wrong inequality; out-of-range interpolation weights raise
  `WeightOutOfRange` and are reported, never clamped.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Union

RationalLike = Union[int, str, Fraction]

# =========================================================================
# errors
# =========================================================================


class CalculusError(ValueError):
    """Base class for unsound or impossible exponent-calculus moves."""


class NoSolution(CalculusError):
    """The requested weight equation is degenerate (equal exponents)."""


class WeightOutOfRange(CalculusError):
    """A solved interpolation weight falls outside [0, 1]."""

    def __init__(self, weight: Fraction, message: str) -> None:
        super().__init__(message)
        self.weight = weight


class DirectionUnsound(CalculusError):
    """The move would need the opposite inequality direction to be valid."""


class UnknownSymbol(CalculusError):
    """A symbol name is not present in the registry."""


# =========================================================================
# symbols
# =========================================================================


class Domain(enum.Enum):
    """What is known a priori about a symbol's range of values."""

    AT_MOST_ONE = "at_most_one"    # 0 < value <= 1
    AT_LEAST_ONE = "at_least_one"  # value >= 1
    FREE = "free"                  # value > 0, nothing else assumed


@dataclass(frozen=True)
class Symbol:
    """A named positive quantity with a coarse domain annotation.

    Symbols are compared by name; the registry guarantees one Symbol per
    name. `order` fixes the canonical printing order.
    """

    name: str
    domain: Domain
    description: str
    order: int = 0

    def __str__(self) -> str:
        return self.name


_REGISTRY: dict[str, Symbol] = {}


def register_symbol(name: str, domain: Domain, description: str) -> Symbol:
    """Add a symbol to the registry (idempotent for identical re-adds)."""
    if name in _REGISTRY:
        existing = _REGISTRY[name]
        if existing.domain is domain:
            return existing
        raise CalculusError(f"symbol {name!r} already registered with domain "
                            f"{existing.domain.value}")
    sym = Symbol(name, domain, description, order=len(_REGISTRY))
    _REGISTRY[name] = sym
    return sym


def get_symbol(name: str) -> Symbol:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownSymbol(f"unknown symbol {name!r}") from None


def registered_symbols() -> tuple[Symbol, ...]:
    return tuple(sorted(_REGISTRY.values(), key=lambda s: s.order))


# scale and density parameters
LAM = register_symbol("lam", Domain.AT_MOST_ONE,
                      "shading density: every tube keeps at least this "
                      "fraction of its cells")
DELTA = register_symbol("delta", Domain.AT_MOST_ONE,
                        "tube thickness (fine scale)")
RHO = register_symbol("rho", Domain.AT_MOST_ONE,
                      "coarse tube thickness, delta <= rho <= 1")
# combinatorial parameters, all at least 1
A = register_symbol("A", Domain.AT_LEAST_ONE,
                    "ratio of fine-scale to coarse-scale mass")
M = register_symbol("m", Domain.AT_LEAST_ONE,
                    "max number of tubes sharing one direction")
D = register_symbol("D", Domain.AT_LEAST_ONE,
                    "number of coarse tubes a fine tube can sit inside")
H = register_symbol("h", Domain.AT_LEAST_ONE,
                    "dyadic level of a superlevel-set decomposition")
R = register_symbol("R", Domain.AT_LEAST_ONE,
                    "frequency radius; fine scale is its inverse square root")
# normalized masses
MASS = register_symbol("mass", Domain.AT_MOST_ONE,
                       "delta^3 times the number of fine tubes (at most "
                       "a constant since directions are separated)")
MASS_RHO = register_symbol("mass_rho", Domain.AT_MOST_ONE,
                           "rho^3 times the number of coarse tubes")
MASS_RATIO = register_symbol("mass_ratio", Domain.AT_MOST_ONE,
                             "fine mass divided by coarse mass")
# derived quantities that bounds are stated about
MU = register_symbol("mu", Domain.AT_LEAST_ONE,
                     "average multiplicity of the shaded union at the "
                     "fine scale")
MU_RHO = register_symbol("mu_rho", Domain.AT_LEAST_ONE,
                         "average multiplicity at the coarse scale")
MU_TILDE = register_symbol("mu_tilde", Domain.AT_LEAST_ONE,
                           "average multiplicity of a rescaled family "
                           "inside one coarse tube")
VOLUME = register_symbol("volume", Domain.AT_MOST_ONE,
                         "measure of the shaded union (inside the unit ball)")
ENDPOINT = register_symbol("endpoint", Domain.FREE,
                           "endpoint norm quantity targeted by the "
                           "restriction-type bound")


# =========================================================================
# exponent vectors
# =========================================================================


def _as_fraction(value: RationalLike) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, str)):
        return Fraction(value)
    raise TypeError(f"expected a rational, got {type(value).__name__}")


@functools.total_ordering
class ExponentVector:
    """Immutable map from symbol names to nonzero rational exponents.

    Represents the monomial prod sym^exp. Multiplication adds exponents,
    `**` scales them; entries that become zero are removed, so two vectors
    are equal iff they denote the same monomial.
    """

    __slots__ = ("_data",)

    def __init__(self, entries: Mapping[str, RationalLike] | None = None):
        data: dict[str, Fraction] = {}
        for name, raw in (entries or {}).items():
            get_symbol(name)
            exp = _as_fraction(raw)
            if exp != 0:
                data[name] = exp
        self._data = data

    # --- mapping-ish access ---

    def get(self, name: str, default: Fraction = Fraction(0)) -> Fraction:
        return self._data.get(name, default)

    def __contains__(self, name: str) -> bool:
        return name in self._data

    def __iter__(self):
        return iter(self._ordered_names())

    def items(self) -> Iterable[tuple[str, Fraction]]:
        return [(n, self._data[n]) for n in self._ordered_names()]

    def _ordered_names(self) -> list[str]:
        return sorted(self._data, key=lambda n: get_symbol(n).order)

    def __len__(self) -> int:
        return len(self._data)

    # --- algebra ---

    def __mul__(self, other: "ExponentVector") -> "ExponentVector":
        merged = dict(self._data)
        for name, exp in other._data.items():
            merged[name] = merged.get(name, Fraction(0)) + exp
        return ExponentVector(merged)

    def __pow__(self, scalar: RationalLike) -> "ExponentVector":
        s = _as_fraction(scalar)
        return ExponentVector({n: e * s for n, e in self._data.items()})

    def without(self, name: str) -> "ExponentVector":
        rest = {n: e for n, e in self._data.items() if n != name}
        return ExponentVector(rest)

    # --- comparisons (lexicographic in canonical order, for sorting) ---

    def _key(self) -> tuple:
        return tuple((n, self._data[n]) for n in self._ordered_names())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExponentVector):
            return NotImplemented
        return self._data == other._data

    def __lt__(self, other: "ExponentVector") -> bool:
        return self._key() < other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    # --- rendering ---

    def __str__(self) -> str:
        if not self._data:
            return "1"
        parts = []
        for name in self._ordered_names():
            exp = self._data[name]
            parts.append(name if exp == 1 else f"{name}^{exp}")
        return " ".join(parts)

    def __repr__(self) -> str:
        return f"ExponentVector({dict(self.items())!r})"

    def to_dict(self) -> dict[str, str]:
        return {n: str(e) for n, e in self.items()}


def monomial(**exponents: RationalLike) -> ExponentVector:
    """Convenience constructor: monomial(lam=1, delta="-1/2")."""
    return ExponentVector(exponents)


# =========================================================================
# bounds
# =========================================================================


class Relation(enum.Enum):
    """Inequality direction, up to the constant tracked by the loss class."""

    UPPER = "<=~"
    LOWER = ">=~"

    def flipped(self) -> "Relation":
        return Relation.LOWER if self is Relation.UPPER else Relation.UPPER


@enum.unique
class Loss(enum.IntEnum):
    """How much the implicit constant is allowed to degrade.

    Ordered: a sharp constant is stronger than a polylog factor, which is
    stronger than an arbitrarily small epsilon power of the scale. Every
    operation takes the max, so the class only ever widens.
    """

    SHARP = 0
    POLYLOG = 1
    EPS_POWER = 2

    @property
    def suffix(self) -> str:
        return {Loss.SHARP: "", Loss.POLYLOG: " ~log",
                Loss.EPS_POWER: " ~eps"}[self]


@dataclass(frozen=True)
class Bound:
    """One-monomial power bound on a registered quantity.

    Invariant: the quantity does not occur among the right-hand-side
    symbols (a bound never mentions itself).
    """

    quantity: Symbol
    relation: Relation
    rhs: ExponentVector
    loss: Loss = Loss.SHARP
    provenance: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.quantity.name in self.rhs:
            raise CalculusError(
                f"bound on {self.quantity.name!r} mentions itself on the "
                f"right-hand side")

    def exponent(self, name: str) -> Fraction:
        return self.rhs.get(name)

    def with_provenance(self, *tags: str) -> "Bound":
        return Bound(self.quantity, self.relation, self.rhs, self.loss,
                     self.provenance + tags)

    def __str__(self) -> str:
        return (f"{self.quantity.name} {self.relation.value} "
                f"{self.rhs}{self.loss.suffix}")

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity.name,
            "relation": self.relation.value,
            "rhs": self.rhs.to_dict(),
            "loss": self.loss.name.lower(),
            "provenance": list(self.provenance),
        }

    @staticmethod
    def from_dict(data: Mapping) -> "Bound":
        return Bound(
            quantity=get_symbol(data["quantity"]),
            relation=Relation(data["relation"]),
            rhs=ExponentVector({k: Fraction(v)
                                for k, v in data["rhs"].items()}),
            loss=Loss[data["loss"].upper()],
            provenance=tuple(data.get("provenance", ())),
        )


def upper(quantity: Symbol | str, loss: Loss = Loss.SHARP,
          provenance: tuple[str, ...] = (), **exponents: RationalLike) -> Bound:
    sym = quantity if isinstance(quantity, Symbol) else get_symbol(quantity)
    return Bound(sym, Relation.UPPER, ExponentVector(exponents), loss,
                 provenance)


def lower(quantity: Symbol | str, loss: Loss = Loss.SHARP,
          provenance: tuple[str, ...] = (), **exponents: RationalLike) -> Bound:
    sym = quantity if isinstance(quantity, Symbol) else get_symbol(quantity)
    return Bound(sym, Relation.LOWER, ExponentVector(exponents), loss,
                 provenance)


# =========================================================================
# operations
# =========================================================================


def _require_compatible(b1: Bound, b2: Bound, op: str) -> None:
    if b1.quantity != b2.quantity:
        raise CalculusError(f"{op}: bounds are on different quantities "
                            f"({b1.quantity.name} vs {b2.quantity.name})")
    if b1.relation is not b2.relation:
        raise DirectionUnsound(f"{op}: bounds point in opposite directions")


def interpolate(b1: Bound, b2: Bound, t: RationalLike) -> Bound:
    """Weighted geometric mean: b1^t * b2^(1-t), weight t on the first.

    Sound because both bounds hold simultaneously and all quantities are
    positive, so raising to powers t, 1-t in [0, 1] and multiplying
    preserves the common direction. In exponent space this is the convex
    combination t * e1 + (1-t) * e2.
    """
    _require_compatible(b1, b2, "interpolate")
    t = _as_fraction(t)
    if not 0 <= t <= 1:
        raise WeightOutOfRange(t, f"interpolation weight {t} outside [0, 1]")
    rhs = (b1.rhs ** t) * (b2.rhs ** (1 - t))
    return Bound(b1.quantity, b1.relation, rhs,
                 max(b1.loss, b2.loss), b1.provenance + b2.provenance)


def solve_weight(b1: Bound, b2: Bound, sym: str,
                 target: RationalLike) -> Fraction:
    """Weight t with t*e1 + (1-t)*e2 == target on `sym`; t sits on b1.

    Raises NoSolution when both bounds carry the same exponent on `sym`
    (the interpolation cannot move it), and WeightOutOfRange when the
    solved weight is not in [0, 1] (reported, never clamped).
    """
    _require_compatible(b1, b2, "solve_weight")
    get_symbol(sym)
    e1, e2 = b1.exponent(sym), b2.exponent(sym)
    target = _as_fraction(target)
    if e1 == e2:
        raise NoSolution(
            f"solve_weight: both bounds carry exponent {e1} on {sym!r}; "
            f"no interpolation weight can reach {target}")
    t = (target - e2) / (e1 - e2)
    if not 0 <= t <= 1:
        raise WeightOutOfRange(
            t, f"solve_weight: hitting {sym}^{target} needs weight {t}, "
               f"outside [0, 1]")
    return t


def eliminate(b1: Bound, b2: Bound, sym: str) -> tuple[Fraction, Bound]:
    """Interpolate so that `sym` drops out exactly; returns (weight, bound).

    Post-condition: the symbol is absent from the result (its exponent is
    exactly zero, so the vector never stores it).
    """
    t = solve_weight(b1, b2, sym, 0)
    result = interpolate(b1, b2, t)
    assert sym not in result.rhs
    return t, result


def compose(outer: Bound, inner: Bound) -> Bound:
    """Substitute `inner` for its quantity inside `outer`'s right-hand side.

    Sound only when the inner quantity occurs with positive exponent and
    both bounds share the same direction (an upper bound on a positively
    occurring factor of an upper bound, or lower into lower). A negative
    occurrence would need the opposite-direction bound and raises
    DirectionUnsound. When the quantity does not occur at all the outer
    bound is returned unchanged, so callers can record a no-op step.
    """
    name = inner.quantity.name
    exp = outer.rhs.get(name)
    if exp == 0:
        return outer
    if exp < 0:
        raise DirectionUnsound(
            f"compose: {name!r} occurs with negative exponent {exp}; "
            f"substituting a {inner.relation.value} bound there is unsound")
    if outer.relation is not inner.relation:
        raise DirectionUnsound(
            f"compose: cannot substitute a {inner.relation.value} bound "
            f"into a {outer.relation.value} bound at a positive occurrence")
    rhs = outer.rhs.without(name) * (inner.rhs ** exp)
    return Bound(outer.quantity, outer.relation, rhs,
                 max(outer.loss, inner.loss),
                 outer.provenance + inner.provenance)


def substitute_rescale(bound: Bound, sym: str,
                       replacement: ExponentVector | Mapping[str, RationalLike]
                       ) -> Bound:
    """Replace `sym` by a monomial in registered symbols (exact rewrite).

    Used for changes of scale and definitional substitutions (for example
    thickness -> inverse square root of the frequency radius, or density ->
    density times a dyadic level). This is an identity rewrite, not an
    inequality, so it applies to both directions and keeps the loss class.
    The replacement may mention `sym` itself (a rescale like thickness ->
    thickness over coarse thickness); substitution is simultaneous, every
    occurrence is rewritten once.
    """
    if not isinstance(replacement, ExponentVector):
        replacement = ExponentVector(dict(replacement))
    if sym == bound.quantity.name:
        raise CalculusError("substitute_rescale: cannot rewrite the bounded "
                            "quantity itself; relabel the bound instead")
    exp = bound.rhs.get(sym)
    if exp == 0:
        return bound
    rhs = bound.rhs.without(sym) * (replacement ** exp)
    return Bound(bound.quantity, bound.relation, rhs, bound.loss,
                 bound.provenance)


def relabel(bound: Bound, quantity: Symbol | str) -> Bound:
    """Restate the bound about a different registered quantity.

    Bookkeeping move for scale instantiation (the same estimate read at a
    different scale is a statement about a different named quantity). The
    caller's derivation step carries the mathematical justification.
    """
    sym = quantity if isinstance(quantity, Symbol) else get_symbol(quantity)
    return Bound(sym, bound.relation, bound.rhs, bound.loss,
                 bound.provenance)


def _check_droppable(op: str, bound: Bound, sym: str,
                     exp: Fraction) -> None:
    """Shared soundness test: may the factor sym^exp be deleted?

    For an upper bound the deleted factor must satisfy sym^exp <= 1
    (domain at-most-one with exp > 0, or at-least-one with exp < 0); for
    a lower bound it must satisfy sym^exp >= 1. Free-domain symbols can
    never be dropped.
    """
    symbol = get_symbol(sym)
    if symbol.domain is Domain.FREE:
        raise DirectionUnsound(
            f"{op}: {sym!r} has free domain; dropping it is unsound")
    factor_at_most_one = (
        (symbol.domain is Domain.AT_MOST_ONE and exp > 0)
        or (symbol.domain is Domain.AT_LEAST_ONE and exp < 0))
    needs_at_most_one = bound.relation is Relation.UPPER
    if factor_at_most_one != needs_at_most_one:
        side = "<= 1" if needs_at_most_one else ">= 1"
        raise DirectionUnsound(
            f"{op}: {sym}^{exp} is not forced {side}, dropping it "
            f"from a {bound.relation.value} bound is unsound")


def drop_bounded(bound: Bound, sym: str) -> Bound:
    """Delete a factor sym^e whose domain forces it to help the inequality.

    The move costs no loss: it only discards a factor that was already on
    the helpful side of 1 (see _check_droppable for the direction table).
    """
    exp = bound.rhs.get(sym)
    if exp == 0:
        raise CalculusError(f"drop_bounded: {sym!r} not present in bound")
    _check_droppable("drop_bounded", bound, sym, exp)
    return Bound(bound.quantity, bound.relation, bound.rhs.without(sym),
                 bound.loss, bound.provenance)


def relax(bound: Bound, sym: str, new_exponent: RationalLike) -> Bound:
    """Move one exponent to a weaker value using the symbol's domain.

    Splits sym^old = sym^new * sym^(old-new) and deletes the second
    factor; the deletion must be sound in the drop_bounded sense, so the
    resulting bound is implied by the input. Typical use: an upper bound
    carries lam^e with e larger than a target exponent e' and lam <= 1,
    so lam^e <= lam^e' and the bound holds with e' in place of e.
    """
    new_exp = Fraction(new_exponent)
    old_exp = bound.rhs.get(sym)
    diff = old_exp - new_exp
    if diff == 0:
        raise CalculusError(
            f"relax: {sym!r} already has exponent {old_exp}")
    _check_droppable("relax", bound, sym, diff)
    rhs = bound.rhs.without(sym)
    if new_exp != 0:
        rhs = rhs * monomial(**{sym: new_exp})
    return Bound(bound.quantity, bound.relation, rhs,
                 bound.loss, bound.provenance)


def double_count(bound: Bound, *, mu_sym: str = "mu",
                 volume_sym: str = "volume",
                 mass_monomial: Mapping[str, RationalLike] | None = None
                 ) -> Bound:
    """Swap union-volume lower bounds and multiplicity upper bounds.

    Counting incidences two ways gives volume * multiplicity == density *
    mass (up to constants), so "volume >=~ V" and "mu <=~ lam * mass / V"
    carry the same information. Applied to a volume lower bound this
    returns the multiplicity upper bound and vice versa; it is an exact
    involution and preserves the loss class.

    `mass_monomial` names the incidence-mass factor (default lam * mass);
    coarse-scale variants pass their own mass symbol and quantity names.
    """
    if mass_monomial is None:
        mass_monomial = {"lam": 1, "mass": 1}
    mass_vec = ExponentVector(dict(mass_monomial))
    mu = get_symbol(mu_sym)
    vol = get_symbol(volume_sym)
    if bound.quantity == vol and bound.relation is Relation.LOWER:
        out_sym, out_rel = mu, Relation.UPPER
    elif bound.quantity == mu and bound.relation is Relation.UPPER:
        out_sym, out_rel = vol, Relation.LOWER
    else:
        raise CalculusError(
            f"double_count: expected a lower bound on {volume_sym!r} or an "
            f"upper bound on {mu_sym!r}, got {bound}")
    rhs = mass_vec * (bound.rhs ** -1)
    return Bound(out_sym, out_rel, rhs, bound.loss, bound.provenance)

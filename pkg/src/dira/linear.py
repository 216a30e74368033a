"""Exact linear constraints and affine expressions over named variables.

Coefficients are ``fractions.Fraction``; every constraint is stored in the
normal form ``sum(c_i * x_i) <rel> bound`` with ``rel`` one of ``<=`` / ``=``
and no zero coefficients.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Union

Number = Union[int, Fraction]

LE = "<="
EQ = "="

Terms = tuple[tuple[str, Fraction], ...]


def _clean_terms(coeffs: Mapping[str, Number] | Iterable[tuple[str, Number]]) -> Terms:
    items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
    acc: dict[str, Fraction] = {}
    for name, c in items:
        acc[name] = acc.get(name, Fraction(0)) + Fraction(c)
    return tuple(sorted((k, v) for k, v in acc.items() if v != 0))


def _fmt_num(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def format_terms(terms: Terms, wrap=lambda v: v) -> str:
    if not terms:
        return "0"
    out = []
    for i, (name, c) in enumerate(terms):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = wrap(name) if mag == 1 else f"{_fmt_num(mag)}*{wrap(name)}"
        if i == 0:
            out.append(body if sign == "+" else f"-{body}")
        else:
            out.append(f"{sign} {body}")
    return " ".join(out)


@dataclass(frozen=True)
class LinearConstraint:
    terms: Terms
    relation: str
    bound: Fraction

    def __post_init__(self):
        if self.relation not in (LE, EQ):
            raise ValueError(f"bad relation {self.relation!r}")
        if any(c == 0 for _, c in self.terms):
            raise ValueError("zero coefficient stored in constraint")

    @classmethod
    def make(cls, coeffs, relation: str, bound: Number) -> "LinearConstraint":
        return cls(_clean_terms(coeffs), relation, Fraction(bound))

    @classmethod
    def le(cls, coeffs, bound: Number) -> "LinearConstraint":
        return cls.make(coeffs, LE, bound)

    @classmethod
    def ge(cls, coeffs, bound: Number) -> "LinearConstraint":
        """``coeffs . x >= bound``, stored as ``-coeffs . x <= -bound``."""
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        return cls.make([(k, -Fraction(v)) for k, v in items], LE, -Fraction(bound))

    @classmethod
    def eq(cls, coeffs, bound: Number) -> "LinearConstraint":
        return cls.make(coeffs, EQ, bound)

    @property
    def coeffs(self) -> dict[str, Fraction]:
        return dict(self.terms)

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(k for k, _ in self.terms)

    def coeff(self, name: str) -> Fraction:
        for k, c in self.terms:
            if k == name:
                return c
        return Fraction(0)

    def is_constant(self) -> bool:
        return not self.terms

    def trivially_true(self) -> bool:
        if self.terms:
            return False
        return self.bound >= 0 if self.relation == LE else self.bound == 0

    def lhs_value(self, point: Mapping[str, Fraction]) -> Fraction:
        return sum((c * point.get(k, 0) for k, c in self.terms), Fraction(0))

    def satisfied_by(self, point: Mapping[str, Fraction]) -> bool:
        v = self.lhs_value(point)
        return v <= self.bound if self.relation == LE else v == self.bound

    def rename(self, mapping: Mapping[str, str] | callable) -> "LinearConstraint":
        f = mapping if callable(mapping) else (lambda k: mapping.get(k, k))
        return LinearConstraint.make([(f(k), c) for k, c in self.terms], self.relation, self.bound)

    def scaled(self, factor: Fraction) -> "LinearConstraint":
        if factor <= 0 and self.relation == LE:
            raise ValueError("inequalities only scale by positive factors")
        return LinearConstraint.make([(k, c * factor) for k, c in self.terms],
                                     self.relation, self.bound * factor)

    def split(self) -> tuple["LinearConstraint", ...]:
        """Equalities become two opposite inequalities; inequalities pass through."""
        if self.relation == LE:
            return (self,)
        return (LinearConstraint(self.terms, LE, self.bound),
                LinearConstraint(tuple((k, -c) for k, c in self.terms), LE, -self.bound))

    def normalized(self) -> "LinearConstraint":
        """Scale so the first coefficient has magnitude one (sign kept for <=)."""
        if not self.terms:
            return self
        lead = self.terms[0][1]
        f = 1 / abs(lead) if self.relation == LE else 1 / lead
        return self.scaled(f) if f != 1 else self

    def to_text(self, wrap=lambda v: v) -> str:
        return f"{format_terms(self.terms, wrap)} {self.relation} {_fmt_num(self.bound)}"

    def __str__(self) -> str:
        return self.to_text()


@dataclass(frozen=True)
class Affine:
    """``sum(c_i * x_i) + constant``."""

    terms: Terms
    constant: Fraction = Fraction(0)

    @classmethod
    def make(cls, coeffs, constant: Number = 0) -> "Affine":
        return cls(_clean_terms(coeffs), Fraction(constant))

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(k for k, _ in self.terms)

    def value(self, point: Mapping[str, Fraction]) -> Fraction:
        return sum((c * point.get(k, 0) for k, c in self.terms), self.constant)

    def to_text(self) -> str:
        if not self.terms:
            return _fmt_num(self.constant)
        body = format_terms(self.terms)
        if self.constant > 0:
            return f"{body} + {_fmt_num(self.constant)}"
        if self.constant < 0:
            return f"{body} - {_fmt_num(-self.constant)}"
        return body

    def __str__(self) -> str:
        return self.to_text()


# ---------------------------------------------------------------------------
# text syntax for expressions and constraints

_TOKEN = re.compile(r"\s*(?:(\d+(?:/\d+)?)|(d\(\s*[A-Za-z_][\w.]*\s*\))|([A-Za-z_][\w.]*'?)|(<=|>=|==|=|\+|-|\*))")


class ExprSyntaxError(ValueError):
    pass


def _tokenize(text: str) -> list[tuple[str, str]]:
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExprSyntaxError(f"unexpected input at {text[pos:]!r}")
        num, deriv, ident, op = m.groups()
        if num is not None:
            out.append(("num", num))
        elif deriv is not None:
            out.append(("deriv", deriv[2:-1].strip()))
        elif ident is not None:
            out.append(("id", ident))
        else:
            out.append(("op", op))
        pos = m.end()
    return out


def _parse_expr(tokens: list[tuple[str, str]]) -> tuple[dict[str, Fraction], Fraction, list[str]]:
    """Parse a sum of terms; returns (coefficients, constant, derivative-var names)."""
    coeffs: dict[str, Fraction] = {}
    const = Fraction(0)
    derivs: list[str] = []
    i = 0
    if not tokens:
        raise ExprSyntaxError("empty expression")
    expect_term = True
    sign = 1
    while i < len(tokens):
        kind, val = tokens[i]
        if expect_term:
            if kind == "op" and val in "+-":
                sign = sign * (-1 if val == "-" else 1)
                i += 1
                continue
            factor = Fraction(sign)
            if kind == "num":
                factor *= Fraction(val)
                i += 1
                if i < len(tokens) and tokens[i] == ("op", "*"):
                    i += 1
                if i < len(tokens) and tokens[i][0] in ("id", "deriv"):
                    kind, val = tokens[i]
                else:
                    const += factor
                    expect_term, sign = False, 1
                    continue
            if kind == "id":
                coeffs[val] = coeffs.get(val, Fraction(0)) + factor
            elif kind == "deriv":
                key = val
                derivs.append(key)
                coeffs[key] = coeffs.get(key, Fraction(0)) + factor
            else:
                raise ExprSyntaxError(f"expected a term, got {val!r}")
            i += 1
            expect_term, sign = False, 1
        else:
            if kind == "op" and val in "+-":
                expect_term = True
                sign = -1 if val == "-" else 1
                i += 1
            else:
                raise ExprSyntaxError(f"expected '+' or '-', got {val!r}")
    if expect_term:
        raise ExprSyntaxError("dangling operator")
    return coeffs, const, derivs


def parse_affine(text: str) -> Affine:
    coeffs, const, derivs = _parse_expr(_tokenize(text))
    if derivs:
        raise ExprSyntaxError("derivatives not allowed in an affine expression")
    return Affine.make(coeffs, const)


def parse_constraints(text: str) -> tuple[list[LinearConstraint], set[str], set[str]]:
    """Parse ``e1 op e2 [op e3]``.

    Returns the constraints, the plain variable names used and the names used
    under ``d(...)``.
    """
    tokens = _tokenize(text)
    parts: list[list[tuple[str, str]]] = [[]]
    ops: list[str] = []
    for tok in tokens:
        if tok[0] == "op" and tok[1] in ("<=", ">=", "=", "=="):
            ops.append("=" if tok[1] == "==" else tok[1])
            parts.append([])
        else:
            parts[-1].append(tok)
    if not ops:
        raise ExprSyntaxError("no relation in constraint")
    exprs = [_parse_expr(p) for p in parts]
    plain: set[str] = set()
    derivs: set[str] = set()
    for coeffs, _, ds in exprs:
        derivs.update(ds)
        plain.update(k for k in coeffs if k not in ds)
    out = []
    for op, (lc, lk, _), (rc, rk, _) in zip(ops, exprs, exprs[1:]):
        diff = dict(lc)
        for k, v in rc.items():
            diff[k] = diff.get(k, Fraction(0)) - v
        bound = rk - lk
        if op == "<=":
            out.append(LinearConstraint.le(diff, bound))
        elif op == ">=":
            out.append(LinearConstraint.ge(diff, bound))
        else:
            out.append(LinearConstraint.eq(diff, bound))
    return out, plain, derivs

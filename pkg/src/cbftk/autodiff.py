"""Forward-mode automatic differentiation on scalars.

A :class:`Dual` carries a value together with a vector of partial
derivatives with respect to the seed variables.  Scalar fields built from
the primitives below (arithmetic, ``sin``/``cos``/``sqrt``, the rectifiers
and ``minimum``/``maximum``) can be differentiated exactly with
:func:`grad`; there is no tape and no higher-order machinery.

State dimensions here are tiny (n <= 4), so every dual number carries the
full partials vector.  All helpers accept plain floats as well, which lets
the same field definitions be evaluated with or without derivatives.
"""

from __future__ import annotations

import math
import numbers

import numpy as np

__all__ = [
    "Dual",
    "EvaluationError",
    "grad",
    "value_and_grad",
    "scalar",
    "sin",
    "cos",
    "sqrt",
    "relu",
    "requ",
    "requ_prime",
    "minimum",
    "maximum",
]


class EvaluationError(ArithmeticError):
    """A primitive could not be evaluated (e.g. 1/0 or sqrt of a negative).

    ``primitive`` names the offending operation.
    """

    def __init__(self, primitive: str, message: str):
        super().__init__(f"{primitive}: {message}")
        self.primitive = primitive


def _as_float(x):
    if isinstance(x, numbers.Real):
        return float(x)
    return None


class Dual:
    """Value plus partial derivatives with respect to the seed variables."""

    __slots__ = ("value", "partials")

    def __init__(self, value: float, partials):
        self.value = float(value)
        self.partials = np.asarray(partials, dtype=float)

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.partials + other.partials)
        c = _as_float(other)
        if c is None:
            return NotImplemented
        return Dual(self.value + c, self.partials)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.partials - other.partials)
        c = _as_float(other)
        if c is None:
            return NotImplemented
        return Dual(self.value - c, self.partials)

    def __rsub__(self, other):
        c = _as_float(other)
        if c is None:
            return NotImplemented
        return Dual(c - self.value, -self.partials)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.value * other.value,
                self.value * other.partials + other.value * self.partials,
            )
        c = _as_float(other)
        if c is None:
            return NotImplemented
        return Dual(self.value * c, self.partials * c)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            if other.value == 0.0:
                raise EvaluationError("divide", "division by a zero-valued operand")
            inv = 1.0 / other.value
            return Dual(
                self.value * inv,
                (self.partials - (self.value * inv) * other.partials) * inv,
            )
        c = _as_float(other)
        if c is None:
            return NotImplemented
        if c == 0.0:
            raise EvaluationError("divide", "division by zero")
        return Dual(self.value / c, self.partials / c)

    def __rtruediv__(self, other):
        c = _as_float(other)
        if c is None:
            return NotImplemented
        if self.value == 0.0:
            raise EvaluationError("divide", "division by a zero-valued operand")
        inv = 1.0 / self.value
        return Dual(c * inv, -c * inv * inv * self.partials)

    def __pow__(self, exponent):
        c = _as_float(exponent)
        if c is None:
            return NotImplemented
        if self.value == 0.0 and c < 1.0:
            raise EvaluationError("pow", "non-differentiable power of zero")
        if self.value < 0.0 and c != round(c):
            raise EvaluationError("pow", "non-integer power of a negative base")
        return Dual(
            self.value**c, c * self.value ** (c - 1.0) * self.partials
        )

    def __neg__(self):
        return Dual(-self.value, -self.partials)

    def __pos__(self):
        return self

    # -- comparisons branch on the value -------------------------------

    def _cmp_value(self, other):
        if isinstance(other, Dual):
            return other.value
        c = _as_float(other)
        if c is None:
            raise TypeError(f"cannot compare Dual with {type(other)!r}")
        return c

    def __lt__(self, other):
        return self.value < self._cmp_value(other)

    def __le__(self, other):
        return self.value <= self._cmp_value(other)

    def __gt__(self, other):
        return self.value > self._cmp_value(other)

    def __ge__(self, other):
        return self.value >= self._cmp_value(other)

    def __eq__(self, other):
        try:
            return self.value == self._cmp_value(other)
        except TypeError:
            return NotImplemented

    def __ne__(self, other):
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    __hash__ = None

    def __repr__(self):
        return f"Dual({self.value!r}, {self.partials!r})"


def scalar(x) -> float:
    """Value of ``x``, whether it is a Dual or a plain number."""
    return x.value if isinstance(x, Dual) else float(x)


# -- smooth primitives ----------------------------------------------------


def sin(x):
    if isinstance(x, Dual):
        return Dual(math.sin(x.value), math.cos(x.value) * x.partials)
    return math.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(math.cos(x.value), -math.sin(x.value) * x.partials)
    return math.cos(x)


def sqrt(x):
    if isinstance(x, Dual):
        if x.value < 0.0:
            raise EvaluationError("sqrt", f"sqrt of negative value {x.value}")
        if x.value == 0.0:
            raise EvaluationError("sqrt", "sqrt is not differentiable at 0")
        root = math.sqrt(x.value)
        return Dual(root, x.partials / (2.0 * root))
    if x < 0.0:
        raise EvaluationError("sqrt", f"sqrt of negative value {x}")
    return math.sqrt(x)


# -- rectifiers ------------------------------------------------------------
#
# requ is C^1 with requ_prime(0) = 0 (both one-sided derivatives agree, so
# this is the true derivative).  relu gets subderivative 0 at its kink;
# differentiating a field across a relu kink is outside the smoothness
# contract and only branch logic should rely on relu here.


def requ(x):
    """Rectified quadratic unit: x^2 for x > 0, else 0."""
    if isinstance(x, Dual):
        if x.value > 0.0:
            return Dual(x.value * x.value, 2.0 * x.value * x.partials)
        return Dual(0.0, 0.0 * x.partials)
    return x * x if x > 0.0 else 0.0


def requ_prime(x):
    """Derivative of requ: 2x for x > 0, else 0 (continuous at 0)."""
    x = scalar(x)
    return 2.0 * x if x > 0.0 else 0.0


def relu(x):
    """Rectified linear unit: max(x, 0), subderivative 0 at the kink."""
    if isinstance(x, Dual):
        if x.value > 0.0:
            return x
        return Dual(0.0, 0.0 * x.partials)
    return x if x > 0.0 else 0.0


def minimum(a, b):
    """Smaller of two operands by value; ties resolve to the first."""
    return a if scalar(a) <= scalar(b) else b


def maximum(a, b):
    """Larger of two operands by value; ties resolve to the first."""
    return a if scalar(a) >= scalar(b) else b


# -- seeding and evaluation -------------------------------------------------


def seed(x) -> list:
    """Dual variables for the components of ``x``, seeded with unit vectors."""
    x = np.asarray(x, dtype=float)
    eye = np.eye(x.size)
    return [Dual(x[i], eye[i]) for i in range(x.size)]


def value_and_grad(field, x):
    """Evaluate a scalar field and its exact gradient at ``x``."""
    x = np.asarray(x, dtype=float)
    out = field(seed(x))
    if isinstance(out, Dual):
        return out.value, out.partials.copy()
    # field did not depend on x at all
    return float(out), np.zeros(x.size)


def grad(field, x) -> np.ndarray:
    """Exact gradient of a scalar field at ``x`` (forward mode)."""
    return value_and_grad(field, x)[1]

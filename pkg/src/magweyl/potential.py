"""Scalar potentials: a tiny expression language, sampled grids and bump weights.

Expressions are written in prefix notation, e.g. ``(+ 1 (* 0.3 x1))``.
Supported heads: ``+ - * / ^ sin cos exp abs absp`` where ``(^ u c)`` needs a
numeric exponent and ``(absp u a)`` is ``|u|**a``.  Coordinates are ``x1..xd``
(1-based in text, 0-based internally); ``pi`` is a recognised constant.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import ndimage

from .errors import ParseError, PsiSupportViolation


_UNARY = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs, "sign": np.sign}


class Expr:
    """Immutable expression node.

    ``op`` is one of ``const``, ``var``, ``+``, ``*``, ``^`` (numeric exponent),
    ``absp`` (numeric exponent) or a unary function name.  Subtraction and
    division are lowered to ``+``/``*`` with ``-1`` and ``^ -1`` at parse time.
    """
    __slots__ = ("op", "args", "val")

    def __init__(self, op, args=(), val=None):
        self.op = op
        self.args = tuple(args)
        self.val = val

    # construction helpers -------------------------------------------------
    @staticmethod
    def const(c):
        return Expr("const", (), float(c))

    @staticmethod
    def var(i):
        return Expr("var", (), int(i))

    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, _lift(other))

    __rmul__ = __mul__

    def __neg__(self):
        return mul(Expr.const(-1.0), self)

    def __sub__(self, other):
        return add(self, -_lift(other))

    def __rsub__(self, other):
        return add(_lift(other), -self)

    def __pow__(self, c):
        return power(self, float(c))

    # inspection -----------------------------------------------------------
    def is_const(self):
        return self.op == "const"

    def variables(self):
        if self.op == "var":
            return {self.val}
        out = set()
        for a in self.args:
            out |= a.variables()
        return out

    def max_var(self):
        v = self.variables()
        return max(v) + 1 if v else 0

    def __eq__(self, other):
        return isinstance(other, Expr) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def key(self):
        return (self.op, self.val, tuple(a.key() for a in self.args))

    def __repr__(self):
        return f"Expr({self.to_text()!r})"

    def to_text(self):
        if self.op == "const":
            return repr(self.val)
        if self.op == "var":
            return f"x{self.val + 1}"
        if self.op in ("^", "absp"):
            return f"({self.op} {self.args[0].to_text()} {self.val!r})"
        return "(" + " ".join([self.op] + [a.to_text() for a in self.args]) + ")"

    # evaluation -----------------------------------------------------------
    def evaluate(self, x):
        """Evaluate at points ``x`` of shape (..., d); returns shape (...)."""
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self._eval(x), x.shape[:-1]).astype(float)

    def _eval(self, x):
        op = self.op
        if op == "const":
            return self.val
        if op == "var":
            return x[..., self.val]
        if op == "+":
            out = 0.0
            for a in self.args:
                out = out + a._eval(x)
            return out
        if op == "*":
            out = 1.0
            for a in self.args:
                out = out * a._eval(x)
            return out
        if op == "^":
            return np.power(self.args[0]._eval(x), self.val)
        if op == "absp":
            return np.power(np.abs(self.args[0]._eval(x)), self.val)
        return _UNARY[op](self.args[0]._eval(x))

    # calculus -------------------------------------------------------------
    def diff(self, i):
        """Symbolic partial derivative in coordinate ``i`` (0-based)."""
        op = self.op
        if op == "const":
            return ZERO
        if op == "var":
            return ONE if self.val == i else ZERO
        if op == "+":
            return add(*[a.diff(i) for a in self.args])
        if op == "*":
            terms = []
            for k, a in enumerate(self.args):
                da = a.diff(i)
                if da.is_const() and da.val == 0.0:
                    continue
                terms.append(mul(*(self.args[:k] + (da,) + self.args[k + 1:])))
            return add(*terms)
        u = self.args[0]
        du = u.diff(i)
        if du.is_const() and du.val == 0.0:
            return ZERO
        if op == "^":
            return mul(Expr.const(self.val), power(u, self.val - 1.0), du)
        if op == "absp":
            return mul(Expr.const(self.val), absp(u, self.val - 1.0), Expr("sign", (u,)), du)
        if op == "sin":
            return mul(Expr("cos", (u,)), du)
        if op == "cos":
            return mul(Expr.const(-1.0), Expr("sin", (u,)), du)
        if op == "exp":
            return mul(self, du)
        if op == "abs":
            return mul(Expr("sign", (u,)), du)
        if op == "sign":
            return ZERO
        raise ParseError(f"cannot differentiate {op}")

    def gradient(self, d):
        return [self.diff(i) for i in range(d)]

    def quadratic_form(self, d):
        """Return ``(c, g, K)`` with ``V = c + g.x + x.K.x/2`` if V is a quadratic polynomial, else None."""
        grad = self.gradient(d)
        hess = [[gi.diff(j) for j in range(d)] for gi in grad]
        if not all(h.is_const() for row in hess for h in row):
            return None
        origin = np.zeros(d)
        c = float(self.evaluate(origin))
        g = np.array([float(gi.evaluate(origin)) for gi in grad])
        K = np.array([[h.val for h in row] for row in hess])
        return c, g, K


def _lift(v):
    return v if isinstance(v, Expr) else Expr.const(v)


ZERO = Expr.const(0.0)
ONE = Expr.const(1.0)


def add(*args):
    flat, c = [], 0.0
    for a in args:
        if a.op == "+":
            items = a.args
        else:
            items = (a,)
        for b in items:
            if b.is_const():
                c += b.val
            else:
                flat.append(b)
    if c != 0.0 or not flat:
        flat.append(Expr.const(c))
    return flat[0] if len(flat) == 1 else Expr("+", flat)


def mul(*args):
    flat, c = [], 1.0
    for a in args:
        items = a.args if a.op == "*" else (a,)
        for b in items:
            if b.is_const():
                c *= b.val
            else:
                flat.append(b)
    if c == 0.0:
        return ZERO
    if c != 1.0 or not flat:
        flat.insert(0, Expr.const(c))
    return flat[0] if len(flat) == 1 else Expr("*", flat)


def power(u, c):
    if c == 0.0:
        return ONE
    if c == 1.0:
        return u
    if u.is_const():
        return Expr.const(u.val ** c)
    return Expr("^", (u,), float(c))


def absp(u, a):
    if a == 0.0:
        return ONE
    if u.is_const():
        return Expr.const(abs(u.val) ** a)
    return Expr("absp", (u,), float(a))


def _fold_unary(name, u):
    if u.is_const():
        return Expr.const(float(_UNARY[name](u.val)))
    return Expr(name, (u,))


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _tokenize(text):
    return text.replace("(", " ( ").replace(")", " ) ").split()


def parse_expr(text):
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty expression")
    expr, pos = _parse(tokens, 0)
    if pos != len(tokens):
        raise ParseError(f"trailing tokens: {' '.join(tokens[pos:])}")
    return expr


def _parse(tokens, pos):
    tok = tokens[pos]
    if tok == ")":
        raise ParseError("unexpected ')'")
    if tok != "(":
        return _atom(tok), pos + 1
    if pos + 1 >= len(tokens):
        raise ParseError("unterminated list")
    head = tokens[pos + 1]
    pos += 2
    args = []
    while True:
        if pos >= len(tokens):
            raise ParseError("missing ')'")
        if tokens[pos] == ")":
            pos += 1
            break
        a, pos = _parse(tokens, pos)
        args.append(a)
    return _build(head, args), pos


def _atom(tok):
    if tok == "pi":
        return Expr.const(math.pi)
    if tok[0] == "x" and tok[1:].isdigit():
        k = int(tok[1:])
        if k < 1:
            raise ParseError("coordinates are numbered from x1")
        return Expr.var(k - 1)
    try:
        return Expr.const(float(tok))
    except ValueError:
        raise ParseError(f"unknown token {tok!r}") from None


def _numeric(arg, head):
    if not arg.is_const():
        raise ParseError(f"'{head}' needs a numeric exponent")
    return arg.val


def _build(head, args):
    if head == "+":
        if not args:
            raise ParseError("'+' needs arguments")
        return add(*args)
    if head == "*":
        if not args:
            raise ParseError("'*' needs arguments")
        return mul(*args)
    if head == "-":
        if len(args) == 1:
            return -args[0]
        if len(args) == 2:
            return args[0] - args[1]
        raise ParseError("'-' takes one or two arguments")
    if head == "/":
        if len(args) != 2:
            raise ParseError("'/' takes two arguments")
        return mul(args[0], power(args[1], -1.0))
    if head == "^":
        if len(args) != 2:
            raise ParseError("'^' takes two arguments")
        return power(args[0], _numeric(args[1], head))
    if head == "absp":
        if len(args) != 2:
            raise ParseError("'absp' takes two arguments")
        return absp(args[0], _numeric(args[1], head))
    if head in ("sin", "cos", "exp", "abs"):
        if len(args) != 1:
            raise ParseError(f"'{head}' takes one argument")
        return _fold_unary(head, args[0])
    raise ParseError(f"unknown operator {head!r}")


# ---------------------------------------------------------------------------
# potential fields
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class PotentialField:
    """Scalar potential on the box ``[-L, L]^d``.

    Exactly one of ``expr`` / ``grid`` is set.  Grid values live on
    ``linspace(-L, L, n)`` along every axis and are interpolated with spline
    order ``interp_order`` (1 or 3).
    """
    d: int
    L: float = 1.0
    expr: Expr = None
    grid: np.ndarray = None
    smoothness: tuple = (math.inf, 0.0)
    interp_order: int = 3
    name: str = ""
    _grad_cache: list = field(default=None, repr=False)

    def __post_init__(self):
        if (self.expr is None) == (self.grid is None):
            raise ParseError("PotentialField needs exactly one of expr / grid")
        if self.expr is not None and self.expr.max_var() > self.d:
            raise ParseError(f"expression uses x{self.expr.max_var()} but d={self.d}")
        if self.grid is not None:
            self.grid = np.asarray(self.grid, dtype=float)
            if self.grid.ndim != self.d:
                raise ParseError("grid dimensionality does not match d")

    @classmethod
    def from_text(cls, text, d, L=1.0, smoothness=(math.inf, 0.0)):
        return cls(d=d, L=L, expr=parse_expr(text), smoothness=smoothness, name=text)

    @classmethod
    def constant(cls, c, d, L=1.0):
        return cls(d=d, L=L, expr=Expr.const(c), name=repr(float(c)))

    def describe(self):
        if self.expr is not None:
            return self.expr.to_text()
        return self.name or f"grid{self.grid.shape}"

    @property
    def is_constant(self):
        if self.expr is not None:
            return self.expr.is_const()
        return float(np.ptp(self.grid)) == 0.0

    def axis_coords(self, n=None):
        n = self.grid.shape[0] if n is None else n
        return np.linspace(-self.L, self.L, n)

    def _grid_index(self, x):
        n = np.array(self.grid.shape, dtype=float)
        return (x + self.L) / (2 * self.L) * (n - 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.expr is not None:
            return self.expr.evaluate(x)
        flat = x.reshape(-1, self.d)
        idx = self._grid_index(flat).T
        vals = ndimage.map_coordinates(self.grid, idx, order=self.interp_order, mode="nearest")
        return vals.reshape(x.shape[:-1])

    def gradient(self, x):
        """Gradient at points (..., d) -> (..., d)."""
        x = np.asarray(x, dtype=float)
        if self.expr is not None:
            if self._grad_cache is None:
                self._grad_cache = self.expr.gradient(self.d)
            return np.stack([g.evaluate(x) for g in self._grad_cache], axis=-1)
        if self._grad_cache is None:
            dx = 2 * self.L / (self.grid.shape[0] - 1)
            self._grad_cache = np.gradient(self.grid, dx, edge_order=2)
            if self.d == 1:
                self._grad_cache = [self._grad_cache]
        flat = x.reshape(-1, self.d)
        idx = self._grid_index(flat).T
        out = [ndimage.map_coordinates(g, idx, order=self.interp_order, mode="nearest")
               for g in self._grad_cache]
        return np.stack(out, axis=-1).reshape(x.shape)

    def quadratic_form(self):
        if self.expr is None:
            return None
        return self.expr.quadratic_form(self.d)

    def depends_only_on(self, axes, basis=None, tol=1e-10, n_samples=64, seed=0):
        """True if V (in coordinates ``y = x @ basis``) varies only along ``axes``.

        Checked by resampling random points with the other coordinates redrawn.
        """
        rng = np.random.default_rng(seed)
        Q = np.eye(self.d) if basis is None else np.asarray(basis)
        half = self.L / 2
        y = rng.uniform(-half, half, size=(n_samples, self.d))
        y2 = rng.uniform(-half, half, size=(n_samples, self.d))
        keep = list(axes)
        y2[:, keep] = y[:, keep]
        v1 = self(y @ Q.T)
        v2 = self(y2 @ Q.T)
        scale = max(1.0, float(np.max(np.abs(v1))))
        return bool(np.max(np.abs(v1 - v2)) <= tol * scale)

    def to_grid(self, n, L=None):
        """Sample onto ``linspace(-L, L, n)^d``."""
        L = self.L if L is None else L
        ax = np.linspace(-L, L, n)
        mesh = np.stack(np.meshgrid(*([ax] * self.d), indexing="ij"), axis=-1)
        return PotentialField(d=self.d, L=L, grid=self(mesh), smoothness=self.smoothness,
                              interp_order=self.interp_order, name=f"grid[{self.describe()}]")


def parse_potential(text, d, L=1.0):
    return PotentialField.from_text(text, d, L)


# ---------------------------------------------------------------------------
# localisation weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Bump:
    """Smooth compactly supported weight ``amp * exp(-1/(1 - |x-c|^2/R^2))``."""
    radius: float = 0.5
    amplitude: float = 1.0
    center: tuple = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.center is not None:
            x = x - np.asarray(self.center, dtype=float)
        s = np.sum(x * x, axis=-1) / self.radius ** 2
        out = np.zeros(s.shape)
        inside = s < 1.0
        out[inside] = self.amplitude * np.exp(-1.0 / (1.0 - s[inside]))
        return out

    def support_radius(self):
        c = 0.0 if self.center is None else float(np.linalg.norm(self.center))
        return c + self.radius

    def describe(self):
        return f"bump(R={self.radius},amp={self.amplitude},c={self.center})"


@dataclass(frozen=True)
class UnitWeight:
    """psi = 1 everywhere (global counting)."""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.ones(x.shape[:-1])

    def support_radius(self):
        return math.inf

    def describe(self):
        return "one"


def check_psi_support(psi, points, radius=0.5, tol=0.0):
    """Raise PsiSupportViolation if psi is nonzero at a point outside B(0, radius)."""
    pts = np.asarray(points, dtype=float)
    outside = np.linalg.norm(pts, axis=-1) > radius + 1e-12
    if np.any(outside):
        vals = np.abs(psi(pts[outside]))
        if np.any(vals > tol):
            raise PsiSupportViolation(f"psi is nonzero outside B(0,{radius}): max {vals.max():.3g}")

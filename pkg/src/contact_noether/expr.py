"""Arithmetic expression language with exact structural differentiation.

Expressions are parsed into immutable ASTs over the phase-space variables
``q0..q(n-1)``, ``p0..p(n-1)``, ``S``, ``t`` and free parameter identifiers
(late-bound at evaluation).  Derivatives are taken structurally on the AST
(forward mode), so every downstream geometric residual is computed with
machine-precision derivatives; finite differences exist only as a test
oracle.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"

``^`` with a non-integer exponent is defined only for positive base;
integer exponents are detected syntactically (a literal exponent with
integral value) and are valid for any base.  The only simplification
performed is eager constant folding (including 0/1 identity elimination,
which keeps repeated derivatives small); no canonicalisation beyond that.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Mapping, Union


INTRINSICS = ("sin", "cos", "exp", "ln", "sqrt", "abs")

_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_QP_RE = re.compile(r"([qp])([0-9]+)\Z")


# ---------------------------------------------------------------------------
# errors


class ExprError(Exception):
    """Base class for expression-language errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnknownIntrinsic(ExprError):
    pass


class IndexOutOfRange(ExprError):
    pass


class DomainError(ExprError):
    """Evaluation left the real domain; carries the offending subexpression."""

    def __init__(self, message: str, where: str):
        super().__init__(f"{message} in `{where}`")
        self.where = where


class UnboundParameter(ExprError):
    pass


# ---------------------------------------------------------------------------
# AST nodes


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Add:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Sub:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Mul:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Div:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Node"


Node = Union[Num, Var, Param, Neg, Add, Sub, Mul, Div, Pow, Call]


def _int_exponent(node: Node) -> int | None:
    """Syntactic integer-exponent detection for the `^` domain rule."""
    if isinstance(node, Num) and float(node.value).is_integer() and abs(node.value) < 2**31:
        return int(node.value)
    return None


# ---------------------------------------------------------------------------
# smart constructors (constant folding only)


def _num(v: float) -> Num:
    return Num(float(v))


def add_(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value + b.value)
    if isinstance(a, Num) and a.value == 0.0:
        return b
    if isinstance(b, Num) and b.value == 0.0:
        return a
    return Add(a, b)


def sub_(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value - b.value)
    if isinstance(b, Num) and b.value == 0.0:
        return a
    if isinstance(a, Num) and a.value == 0.0:
        return neg_(b)
    return Sub(a, b)


def mul_(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value * b.value)
    if isinstance(a, Num):
        if a.value == 0.0:
            return _num(0.0)
        if a.value == 1.0:
            return b
    if isinstance(b, Num):
        if b.value == 0.0:
            return _num(0.0)
        if b.value == 1.0:
            return a
    return Mul(a, b)


def div_(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0.0:
        return _num(a.value / b.value)
    if isinstance(a, Num) and a.value == 0.0:
        return _num(0.0)
    if isinstance(b, Num) and b.value == 1.0:
        return a
    return Div(a, b)


def neg_(a: Node) -> Node:
    if isinstance(a, Num):
        return _num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def pow_(a: Node, b: Node) -> Node:
    if isinstance(b, Num):
        if b.value == 1.0:
            return a
        if b.value == 0.0:
            return _num(1.0)
        if isinstance(a, Num):
            try:
                k = _int_exponent(b)
                v = a.value ** (k if k is not None else b.value)
            except (OverflowError, ZeroDivisionError, ValueError):
                return Pow(a, b)
            if isinstance(v, float) and math.isfinite(v):
                return _num(v)
    return Pow(a, b)


def call_(fn: str, arg: Node) -> Node:
    if isinstance(arg, Num):
        try:
            v = _INTRINSIC_IMPL[fn](arg.value, fn)
        except DomainError:
            return Call(fn, arg)
        return _num(v)
    return Call(fn, arg)


# ---------------------------------------------------------------------------
# guarded numeric kernels (shared by the interpreter and compiled code,
# so both paths are bit-identical)


def _guard_finite(v: float, where: str) -> float:
    if not math.isfinite(v):
        raise DomainError("non-finite result", where)
    return v


def _k_sin(x: float, where: str) -> float:
    return math.sin(x)


def _k_cos(x: float, where: str) -> float:
    return math.cos(x)


def _k_exp(x: float, where: str) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        raise DomainError("exp overflow", where) from None


def _k_ln(x: float, where: str) -> float:
    if x <= 0.0:
        raise DomainError("ln of non-positive value", where)
    return math.log(x)


def _k_sqrt(x: float, where: str) -> float:
    if x < 0.0:
        raise DomainError("sqrt of negative value", where)
    return math.sqrt(x)


def _k_abs(x: float, where: str) -> float:
    return abs(x)


_INTRINSIC_IMPL: dict[str, Callable[[float, str], float]] = {
    "sin": _k_sin,
    "cos": _k_cos,
    "exp": _k_exp,
    "ln": _k_ln,
    "sqrt": _k_sqrt,
    "abs": _k_abs,
}


def _k_div(a: float, b: float, where: str) -> float:
    if b == 0.0:
        raise DomainError("division by zero", where)
    return _guard_finite(a / b, where)


def _k_pow_int(b: float, k: int, where: str) -> float:
    try:
        return _guard_finite(b**k, where)
    except (OverflowError, ZeroDivisionError):
        raise DomainError("integer power out of domain", where) from None


def _k_pow(b: float, e: float, where: str) -> float:
    if b <= 0.0:
        raise DomainError("non-integer power of non-positive base", where)
    try:
        return _guard_finite(b**e, where)
    except OverflowError:
        raise DomainError("power overflow", where) from None


# ---------------------------------------------------------------------------
# pretty printing

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(node: Node) -> int:
    if isinstance(node, (Add, Sub)):
        return _PREC_ADD
    if isinstance(node, (Mul, Div)):
        return _PREC_MUL
    if isinstance(node, Neg):
        return _PREC_NEG
    if isinstance(node, Num) and node.value < 0:
        return _PREC_NEG
    if isinstance(node, Pow):
        return _PREC_POW
    return _PREC_ATOM


def _wrap(node: Node, min_prec: int) -> str:
    s = to_source(node)
    return f"({s})" if _prec(node) < min_prec else s


def to_source(node: Node) -> str:
    """Render a node back to parseable source (round-trip safe)."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, (Var, Param)):
        return node.name
    if isinstance(node, Neg):
        return "-" + _wrap(node.arg, _PREC_NEG)
    if isinstance(node, Add):
        return f"{_wrap(node.left, _PREC_ADD)} + {_wrap(node.right, _PREC_ADD)}"
    if isinstance(node, Sub):
        return f"{_wrap(node.left, _PREC_ADD)} - {_wrap(node.right, _PREC_MUL)}"
    if isinstance(node, Mul):
        return f"{_wrap(node.left, _PREC_MUL)}*{_wrap(node.right, _PREC_MUL)}"
    if isinstance(node, Div):
        return f"{_wrap(node.left, _PREC_MUL)}/{_wrap(node.right, _PREC_NEG)}"
    if isinstance(node, Pow):
        return f"{_wrap(node.base, _PREC_ATOM)}^{_wrap(node.exponent, _PREC_ATOM)}"
    if isinstance(node, Call):
        return f"{node.fn}({to_source(node.arg)})"
    raise TypeError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# reference interpreter


def eval_node(node: Node, env: Mapping[str, float]) -> float:
    """Tree-walking evaluator; reference semantics for the compiled path."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, (Var, Param)):
        return env[node.name]
    if isinstance(node, Neg):
        return -eval_node(node.arg, env)
    if isinstance(node, Add):
        return eval_node(node.left, env) + eval_node(node.right, env)
    if isinstance(node, Sub):
        return eval_node(node.left, env) - eval_node(node.right, env)
    if isinstance(node, Mul):
        return eval_node(node.left, env) * eval_node(node.right, env)
    if isinstance(node, Div):
        return _k_div(eval_node(node.left, env), eval_node(node.right, env), to_source(node))
    if isinstance(node, Pow):
        k = _int_exponent(node.exponent)
        if k is not None:
            return _k_pow_int(eval_node(node.base, env), k, to_source(node))
        return _k_pow(eval_node(node.base, env), eval_node(node.exponent, env), to_source(node))
    if isinstance(node, Call):
        return _INTRINSIC_IMPL[node.fn](eval_node(node.arg, env), to_source(node))
    raise TypeError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# compilation to a python callable (same operation order as eval_node)


def _codegen(node: Node, consts: list[str]) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, (Var, Param)):
        return f"_v_{node.name}"
    if isinstance(node, Neg):
        return f"(-{_codegen(node.arg, consts)})"
    if isinstance(node, Add):
        return f"({_codegen(node.left, consts)} + {_codegen(node.right, consts)})"
    if isinstance(node, Sub):
        return f"({_codegen(node.left, consts)} - {_codegen(node.right, consts)})"
    if isinstance(node, Mul):
        return f"({_codegen(node.left, consts)}*{_codegen(node.right, consts)})"
    if isinstance(node, Div):
        consts.append(to_source(node))
        return f"_div({_codegen(node.left, consts)}, {_codegen(node.right, consts)}, _c{len(consts) - 1})"
    if isinstance(node, Pow):
        k = _int_exponent(node.exponent)
        consts.append(to_source(node))
        label = f"_c{len(consts) - 1}"
        if k is not None:
            return f"_powi({_codegen(node.base, consts)}, {k}, {label})"
        return f"_powf({_codegen(node.base, consts)}, {_codegen(node.exponent, consts)}, {label})"
    if isinstance(node, Call):
        consts.append(to_source(node))
        return f"_{node.fn}({_codegen(node.arg, consts)}, _c{len(consts) - 1})"
    raise TypeError(f"unknown node {node!r}")


def _compile(node: Node, names: Iterable[str]) -> Callable[[Mapping[str, float]], float]:
    consts: list[str] = []
    body = _codegen(node, consts)
    lines = ["def _f(_env):"]
    for nm in sorted(names):
        lines.append(f"    _v_{nm} = _env[{nm!r}]")
    lines.append(f"    return {body}")
    glb: dict[str, object] = {
        "_div": _k_div,
        "_powi": _k_pow_int,
        "_powf": _k_pow,
    }
    for fn, impl in _INTRINSIC_IMPL.items():
        glb[f"_{fn}"] = impl
    for i, c in enumerate(consts):
        glb[f"_c{i}"] = c
    loc: dict[str, object] = {}
    exec(compile("\n".join(lines), "<scalar-field>", "exec"), glb, loc)
    return loc["_f"]  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# scalar fields


def _collect_names(node: Node, vars_out: set[str], params_out: set[str]) -> None:
    if isinstance(node, Var):
        vars_out.add(node.name)
    elif isinstance(node, Param):
        params_out.add(node.name)
    elif isinstance(node, Neg):
        _collect_names(node.arg, vars_out, params_out)
    elif isinstance(node, (Add, Sub, Mul, Div)):
        _collect_names(node.left, vars_out, params_out)
        _collect_names(node.right, vars_out, params_out)
    elif isinstance(node, Pow):
        _collect_names(node.base, vars_out, params_out)
        _collect_names(node.exponent, vars_out, params_out)
    elif isinstance(node, Call):
        _collect_names(node.arg, vars_out, params_out)


def valid_variables(n: int) -> frozenset[str]:
    names = {f"q{i}" for i in range(n)} | {f"p{i}" for i in range(n)} | {"S", "t"}
    return frozenset(names)


@dataclass(eq=False)
class ScalarField:
    """A parsed, exactly differentiable expression over (q, p, S, t) and params.

    Immutable after construction; safe to share across threads.  Arithmetic
    operators combine fields (dimensions must agree); numbers are lifted to
    constants.
    """

    ast: Node
    n: int

    def __post_init__(self) -> None:
        vs: set[str] = set()
        ps: set[str] = set()
        _collect_names(self.ast, vs, ps)
        bad = vs - valid_variables(self.n)
        if bad:
            raise IndexOutOfRange(f"variables {sorted(bad)} out of range for dimension n={self.n}")
        self.free_vars: frozenset[str] = frozenset(vs)
        self.free_params: frozenset[str] = frozenset(ps)

    @cached_property
    def _fn(self) -> Callable[[Mapping[str, float]], float]:
        return _compile(self.ast, self.free_vars | self.free_params)

    def eval_env(self, env: Mapping[str, float]) -> float:
        """Evaluate with a prebuilt name->value environment (hot path)."""
        return self._fn(env)

    def source(self) -> str:
        return to_source(self.ast)

    def _lift(self, other: "ScalarField | float | int") -> Node:
        if isinstance(other, ScalarField):
            if other.n != self.n:
                raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")
            return other.ast
        return _num(float(other))

    def _make(self, node: Node) -> "ScalarField":
        return ScalarField(node, self.n)

    def __add__(self, other):
        return self._make(add_(self.ast, self._lift(other)))

    def __radd__(self, other):
        return self._make(add_(self._lift(other), self.ast))

    def __sub__(self, other):
        return self._make(sub_(self.ast, self._lift(other)))

    def __rsub__(self, other):
        return self._make(sub_(self._lift(other), self.ast))

    def __mul__(self, other):
        return self._make(mul_(self.ast, self._lift(other)))

    def __rmul__(self, other):
        return self._make(mul_(self._lift(other), self.ast))

    def __truediv__(self, other):
        return self._make(div_(self.ast, self._lift(other)))

    def __rtruediv__(self, other):
        return self._make(div_(self._lift(other), self.ast))

    def __pow__(self, other):
        return self._make(pow_(self.ast, self._lift(other)))

    def __neg__(self):
        return self._make(neg_(self.ast))

    def __repr__(self) -> str:
        return f"ScalarField({self.source()!r}, n={self.n})"


def number(v: float, n: int) -> ScalarField:
    return ScalarField(_num(v), n)


def variable(name: str, n: int) -> ScalarField:
    if name not in valid_variables(n):
        raise IndexOutOfRange(f"{name!r} is not a variable for dimension n={n}")
    return ScalarField(Var(name), n)


def parameter(name: str, n: int) -> ScalarField:
    if not _IDENT_RE.fullmatch(name) or name in INTRINSICS:
        raise ValueError(f"invalid parameter name {name!r}")
    return ScalarField(Param(name), n)


def apply_intrinsic(fn: str, arg: ScalarField) -> ScalarField:
    if fn not in INTRINSICS:
        raise UnknownIntrinsic(f"unknown intrinsic {fn!r}")
    return ScalarField(call_(fn, arg.ast), arg.n)


@dataclass(frozen=True)
class EvalContext:
    """A point plus parameter bindings for one evaluation."""

    point: "object"  # geometry.ExtendedPoint (duck-typed: has .env() and .n)
    params: Mapping[str, float]


# ---------------------------------------------------------------------------
# parsing


class _Tokenizer:
    def __init__(self, source: str):
        self.source = source
        self.pos = 0

    def _byte_offset(self, pos: int) -> int:
        return len(self.source[:pos].encode("utf-8"))

    def error(self, message: str, pos: int | None = None) -> ExprSyntaxError:
        return ExprSyntaxError(message, self._byte_offset(self.pos if pos is None else pos))

    def skip_ws(self) -> None:
        while self.pos < len(self.source) and self.source[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.source[self.pos] if self.pos < len(self.source) else ""

    def take(self, ch: str) -> bool:
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def expect(self, ch: str) -> None:
        if not self.take(ch):
            raise self.error(f"expected {ch!r}")

    def ident(self) -> str | None:
        self.skip_ws()
        m = _IDENT_RE.match(self.source, self.pos)
        if m is None:
            return None
        self.pos = m.end()
        return m.group(0)

    def num(self) -> float | None:
        self.skip_ws()
        m = _NUMBER_RE.match(self.source, self.pos)
        if m is None:
            return None
        self.pos = m.end()
        return float(m.group(0))

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.source)


class _Parser:
    def __init__(self, source: str, n: int):
        self.tk = _Tokenizer(source)
        self.n = n

    def parse(self) -> Node:
        node = self.expr()
        if not self.tk.at_end():
            raise self.tk.error("unexpected trailing input")
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            if self.tk.take("+"):
                node = add_(node, self.term())
            elif self.tk.take("-"):
                node = sub_(node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.unary()
        while True:
            if self.tk.take("*"):
                node = mul_(node, self.unary())
            elif self.tk.take("/"):
                node = div_(node, self.unary())
            else:
                return node

    def unary(self) -> Node:
        if self.tk.take("-"):
            return neg_(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tk.take("^"):
            return pow_(base, self.unary())
        return base

    def atom(self) -> Node:
        start = self.tk.pos
        v = self.tk.num()
        if v is not None:
            return _num(v)
        name = self.tk.ident()
        if name is not None:
            if self.tk.peek() == "(":
                if name not in INTRINSICS:
                    raise UnknownIntrinsic(
                        f"unknown intrinsic {name!r} (byte offset {self.tk._byte_offset(start)})"
                    )
                self.tk.expect("(")
                arg = self.expr()
                self.tk.expect(")")
                return call_(name, arg)
            if name in INTRINSICS:
                raise self.tk.error(f"intrinsic name {name!r} used as identifier", start)
            m = _QP_RE.fullmatch(name)
            if m is not None:
                idx = int(m.group(2))
                if idx >= self.n:
                    raise IndexOutOfRange(
                        f"{name!r} out of range for dimension n={self.n}"
                    )
                return Var(f"{m.group(1)}{idx}")
            if name in ("S", "t"):
                return Var(name)
            return Param(name)
        if self.tk.take("("):
            node = self.expr()
            self.tk.expect(")")
            return node
        raise self.tk.error("expected a number, identifier or parenthesised expression")


def parse(source: str, n: int) -> ScalarField:
    """Parse `source` into a ScalarField of dimension `n`."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    return ScalarField(_Parser(source, n).parse(), n)


# ---------------------------------------------------------------------------
# evaluation / differentiation / substitution


def evaluate(field: ScalarField, ctx: EvalContext) -> float:
    """Evaluate at ctx.point with ctx.params bound; never returns NaN/Inf."""
    missing = field.free_params - set(ctx.params)
    if missing:
        raise UnboundParameter(f"unbound parameters {sorted(missing)}")
    if ctx.point.n != field.n:
        raise ValueError(f"point dimension {ctx.point.n} != field dimension {field.n}")
    env = dict(ctx.point.env())
    env.update(ctx.params)
    return field.eval_env(env)


def _diff(node: Node, name: str) -> Node:
    if isinstance(node, Num):
        return _num(0.0)
    if isinstance(node, (Var, Param)):
        return _num(1.0 if node.name == name else 0.0)
    if isinstance(node, Neg):
        return neg_(_diff(node.arg, name))
    if isinstance(node, Add):
        return add_(_diff(node.left, name), _diff(node.right, name))
    if isinstance(node, Sub):
        return sub_(_diff(node.left, name), _diff(node.right, name))
    if isinstance(node, Mul):
        return add_(
            mul_(_diff(node.left, name), node.right),
            mul_(node.left, _diff(node.right, name)),
        )
    if isinstance(node, Div):
        # (f/g)' = f'/g - f g'/g^2
        return sub_(
            div_(_diff(node.left, name), node.right),
            div_(mul_(node.left, _diff(node.right, name)), pow_(node.right, _num(2.0))),
        )
    if isinstance(node, Pow):
        dbase = _diff(node.base, name)
        if isinstance(node.exponent, Num):
            k = node.exponent.value
            return mul_(
                mul_(_num(k), pow_(node.base, _num(k - 1.0))),
                dbase,
            )
        dexp = _diff(node.exponent, name)
        # f^g * (g' ln f + g f'/f); valid on the f > 0 domain of f^g
        return mul_(
            Pow(node.base, node.exponent),
            add_(
                mul_(dexp, call_("ln", node.base)),
                mul_(node.exponent, div_(dbase, node.base)),
            ),
        )
    if isinstance(node, Call):
        inner = _diff(node.arg, name)
        a = node.arg
        if node.fn == "sin":
            outer: Node = call_("cos", a)
        elif node.fn == "cos":
            outer = neg_(call_("sin", a))
        elif node.fn == "exp":
            outer = call_("exp", a)
        elif node.fn == "ln":
            outer = div_(_num(1.0), a)
        elif node.fn == "sqrt":
            outer = div_(_num(1.0), mul_(_num(2.0), call_("sqrt", a)))
        elif node.fn == "abs":
            # sign(a) away from zero; evaluation at a == 0 raises DomainError
            outer = div_(a, call_("abs", a))
        else:
            raise UnknownIntrinsic(node.fn)
        return mul_(outer, inner)
    raise TypeError(f"unknown node {node!r}")


def partial(field: ScalarField, name: str) -> ScalarField:
    """Exact partial derivative with respect to a variable or parameter."""
    if name not in valid_variables(field.n) and not _IDENT_RE.fullmatch(name):
        raise ValueError(f"invalid differentiation target {name!r}")
    return ScalarField(_diff(field.ast, name), field.n)


def _subst(node: Node, name: str, replacement: Node) -> Node:
    if isinstance(node, (Var, Param)):
        return replacement if node.name == name else node
    if isinstance(node, Num):
        return node
    if isinstance(node, Neg):
        return neg_(_subst(node.arg, name, replacement))
    if isinstance(node, Add):
        return add_(_subst(node.left, name, replacement), _subst(node.right, name, replacement))
    if isinstance(node, Sub):
        return sub_(_subst(node.left, name, replacement), _subst(node.right, name, replacement))
    if isinstance(node, Mul):
        return mul_(_subst(node.left, name, replacement), _subst(node.right, name, replacement))
    if isinstance(node, Div):
        return div_(_subst(node.left, name, replacement), _subst(node.right, name, replacement))
    if isinstance(node, Pow):
        return pow_(_subst(node.base, name, replacement), _subst(node.exponent, name, replacement))
    if isinstance(node, Call):
        return call_(node.fn, _subst(node.arg, name, replacement))
    raise TypeError(f"unknown node {node!r}")


def substitute(field: ScalarField, name: str, replacement: ScalarField | float) -> ScalarField:
    """Replace every occurrence of an identifier by another field (or number)."""
    if isinstance(replacement, ScalarField):
        if replacement.n != field.n:
            raise ValueError("dimension mismatch in substitution")
        rep = replacement.ast
    else:
        rep = _num(float(replacement))
    return ScalarField(_subst(field.ast, name, rep), field.n)

"""Expression language: parser, evaluator, symbolic derivative, printer.

Grammar (whitespace ignored)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := number | name | name '(' expr ')' | '(' expr ')' | 'pi'

So ``-x^2`` is ``-(x^2)`` and ``a^b^c`` is ``a^(b^c)``.  Names listed as
parameters at parse time become :class:`Param` nodes and are constants for
:func:`diff`.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence, Union

__all__ = [
    "Expr", "Num", "Var", "Param", "Pi", "Neg", "Add", "Sub", "Mul", "Div",
    "Pow", "Call", "FUNCTIONS", "ExprError", "ParseError", "EvalError",
    "UnboundNameError", "DomainError", "parse", "evaluate", "diff",
    "simplify", "to_string", "free_names", "substitute", "compile_exprs",
    "is_constant", "is_negation", "compile_vectorized",
]

# log is not part of the surface grammar's documented set but is needed so
# that d(u^v)/dx stays inside the language when v depends on x.
FUNCTIONS = ("sin", "cos", "exp", "sqrt", "log")


class ExprError(Exception):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, offset: int, expected: Iterable[str] = ()):
        self.offset = offset
        self.expected = tuple(sorted(expected))
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class EvalError(ExprError):
    pass


class UnboundNameError(EvalError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound name {name!r}")


class DomainError(EvalError):
    def __init__(self, node: "Expr", reason: str):
        self.node = node
        super().__init__(f"domain violation in {to_string(node)}: {reason}")


# --------------------------------------------------------------------------
# AST

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
class Pi:
    pass


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Param, Pi, Neg, Add, Sub, Mul, Div, Pow, Call]
_BINARY = (Add, Sub, Mul, Div, Pow)
_BINOP_SYMBOL = {Add: "+", Sub: "-", Mul: "*", Div: "/", Pow: "^"}

# --------------------------------------------------------------------------
# Tokenizer / parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)

_ATOM_START = ("number", "name", "'('", "'-'")


class _Parser:
    def __init__(self, text: str, params: frozenset):
        self.text = text
        self.params = params
        self.tokens = self._tokenize(text)
        self.pos = 0

    def _byte_offset(self, char_index: int) -> int:
        return len(self.text[:char_index].encode("utf-8"))

    def _tokenize(self, text):
        tokens = []
        i = 0
        while i < len(text):
            m = _TOKEN_RE.match(text, i)
            if m is None:
                raise ParseError(f"unexpected character {text[i]!r}",
                                 self._byte_offset(i), _ATOM_START)
            kind = m.lastgroup
            if kind != "ws":
                tokens.append((kind, m.group(), self._byte_offset(i)))
            i = m.end()
        tokens.append(("eof", "", self._byte_offset(len(text))))
        return tokens

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, value, offset = self.peek()
        if kind == "op" and value == op:
            return self.advance()
        found = "end of input" if kind == "eof" else repr(value)
        raise ParseError(f"unexpected {found}", offset, (f"'{op}'",))

    def parse(self) -> Expr:
        e = self.expr()
        kind, value, offset = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected {value!r}", offset,
                             ("'+'", "'-'", "'*'", "'/'", "'^'", "end of input"))
        return e

    def expr(self) -> Expr:
        left = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                right = self.term()
                left = Add(left, right) if value == "+" else Sub(left, right)
            else:
                return left

    def term(self) -> Expr:
        left = self.factor()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                right = self.factor()
                left = Mul(left, right) if value == "*" else Div(left, right)
            else:
                return left

    def factor(self) -> Expr:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            return Pow(base, self.factor())
        return base

    def atom(self) -> Expr:
        kind, value, offset = self.peek()
        if kind == "number":
            self.advance()
            return Num(float(value))
        if kind == "name":
            self.advance()
            nkind, nvalue, _ = self.peek()
            if nkind == "op" and nvalue == "(":
                if value not in FUNCTIONS:
                    raise ParseError(f"unknown function {value!r}", offset,
                                     tuple(repr(f) for f in FUNCTIONS))
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Call(value, arg)
            if value == "pi":
                return Pi()
            if value in self.params:
                return Param(value)
            return Var(value)
        if kind == "op" and value == "(":
            self.advance()
            inner = self.expr()
            self.expect_op(")")
            return inner
        found = "end of input" if kind == "eof" else repr(value)
        raise ParseError(f"unexpected {found}", offset, _ATOM_START)


def parse(text: str, params: Iterable[str] = ()) -> Expr:
    """Parse ``text``; names in ``params`` become :class:`Param` nodes."""
    return _Parser(text, frozenset(params)).parse()


# --------------------------------------------------------------------------
# Evaluation

def _apply(func: str, x: float, node: Expr) -> float:
    try:
        if func == "sin":
            return math.sin(x)
        if func == "cos":
            return math.cos(x)
        if func == "exp":
            return math.exp(x)
        if func == "sqrt":
            return math.sqrt(x)
        if func == "log":
            return math.log(x)
    except (ValueError, OverflowError) as exc:
        raise DomainError(node, str(exc)) from None
    raise EvalError(f"unknown function {func!r}")


def evaluate(e: Expr, env: Mapping[str, float]) -> float:
    """Evaluate ``e`` with all free names looked up in ``env``."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, (Var, Param)):
        try:
            return float(env[e.name])
        except KeyError:
            raise UnboundNameError(e.name) from None
    if isinstance(e, Pi):
        return math.pi
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, Call):
        return _apply(e.func, evaluate(e.arg, env), e)
    a = evaluate(e.left if not isinstance(e, Pow) else e.base, env)
    b = evaluate(e.right if not isinstance(e, Pow) else e.exponent, env)
    if isinstance(e, Add):
        return a + b
    if isinstance(e, Sub):
        return a - b
    if isinstance(e, Mul):
        return a * b
    if isinstance(e, Div):
        if b == 0.0:
            raise DomainError(e, "division by zero")
        return a / b
    if isinstance(e, Pow):
        try:
            return math.pow(a, b)
        except (ValueError, OverflowError, ZeroDivisionError) as exc:
            raise DomainError(e, str(exc) or "invalid power") from None
    raise TypeError(f"not an expression: {e!r}")


# --------------------------------------------------------------------------
# Structure helpers

def _children(e: Expr) -> tuple:
    if isinstance(e, (Neg, Call)):
        return (e.arg,)
    if isinstance(e, Pow):
        return (e.base, e.exponent)
    if isinstance(e, _BINARY):
        return (e.left, e.right)
    return ()


def free_names(e: Expr) -> set[str]:
    """Names of all variables and parameters occurring in ``e``."""
    out: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, (Var, Param)):
            out.add(node.name)
        stack.extend(_children(node))
    return out


def free_vars(e: Expr) -> set[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        stack.extend(_children(node))
    return out


def is_constant(e: Expr) -> bool:
    """True if ``e`` contains no :class:`Var` (parameters count as constants)."""
    return not free_vars(e)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables (not parameters) by expressions."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), substitute(e.exponent, mapping))
    if isinstance(e, _BINARY):
        return type(e)(substitute(e.left, mapping), substitute(e.right, mapping))
    return e


def is_negation(a: Expr, b: Expr) -> bool:
    """Syntactic test that ``a`` is the negation of ``b``."""
    if a == Neg(b) or b == Neg(a):
        return True
    if isinstance(a, Num) and isinstance(b, Num):
        return a.value == -b.value
    return False


# --------------------------------------------------------------------------
# Simplification and differentiation

def _is_num(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Num) and (value is None or e.value == value)


def _mk_neg(a: Expr) -> Expr:
    if isinstance(a, Neg):
        return a.arg
    if _is_num(a, 0.0):
        return Num(0.0)
    return Neg(a)


def _mk_add(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if isinstance(b, Neg):
        return _mk_sub(a, b.arg)
    return Add(a, b)


def _mk_sub(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return _mk_neg(b)
    if isinstance(b, Neg):
        return Add(a, b.arg)
    return Sub(a, b)


def _mk_mul(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a, -1.0):
        return _mk_neg(b)
    if _is_num(b, -1.0):
        return _mk_neg(a)
    if isinstance(a, Neg) and isinstance(b, Neg):
        return _mk_mul(a.arg, b.arg)
    if isinstance(a, Neg):
        return _mk_neg(_mk_mul(a.arg, b))
    if isinstance(b, Neg):
        return _mk_neg(_mk_mul(a, b.arg))
    return Mul(a, b)


def _mk_div(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0) and not _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(b, 1.0):
        return a
    return Div(a, b)


def _mk_pow(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 1.0):
        return a
    if _is_num(b, 0.0):
        return Num(1.0)
    return Pow(a, b)


def simplify(e: Expr) -> Expr:
    """Conservative syntactic cleanup: drops additive zeros and unit factors.

    No constant folding beyond these identities, so evaluation of the result
    agrees with the input to the last bit wherever the input is finite.
    """
    if isinstance(e, Neg):
        return _mk_neg(simplify(e.arg))
    if isinstance(e, Call):
        return Call(e.func, simplify(e.arg))
    if isinstance(e, Add):
        return _mk_add(simplify(e.left), simplify(e.right))
    if isinstance(e, Sub):
        return _mk_sub(simplify(e.left), simplify(e.right))
    if isinstance(e, Mul):
        return _mk_mul(simplify(e.left), simplify(e.right))
    if isinstance(e, Div):
        return _mk_div(simplify(e.left), simplify(e.right))
    if isinstance(e, Pow):
        return _mk_pow(simplify(e.base), simplify(e.exponent))
    return e


def diff(e: Expr, var: str) -> Expr:
    """Exact derivative of ``e`` with respect to the variable ``var``."""
    if isinstance(e, Var):
        return Num(1.0) if e.name == var else Num(0.0)
    if isinstance(e, (Num, Param, Pi)):
        return Num(0.0)
    if isinstance(e, Neg):
        return _mk_neg(diff(e.arg, var))
    if isinstance(e, Add):
        return _mk_add(diff(e.left, var), diff(e.right, var))
    if isinstance(e, Sub):
        return _mk_sub(diff(e.left, var), diff(e.right, var))
    if isinstance(e, Mul):
        return _mk_add(_mk_mul(diff(e.left, var), e.right),
                       _mk_mul(e.left, diff(e.right, var)))
    if isinstance(e, Div):
        du, dv = diff(e.left, var), diff(e.right, var)
        if _is_num(dv, 0.0):
            return _mk_div(du, e.right)
        return _mk_div(_mk_sub(_mk_mul(du, e.right), _mk_mul(e.left, dv)),
                       Pow(e.right, Num(2.0)))
    if isinstance(e, Pow):
        u, v = e.base, e.exponent
        du, dv = diff(u, var), diff(v, var)
        if _is_num(dv, 0.0):
            # v * u^(v-1) * u'
            if isinstance(v, Num):
                lowered = Num(v.value - 1.0)
            else:
                lowered = Sub(v, Num(1.0))
            return _mk_mul(_mk_mul(v, _mk_pow(u, lowered)), du)
        # u^v * (v' log u + v u'/u)
        return _mk_mul(e, _mk_add(_mk_mul(dv, Call("log", u)),
                                  _mk_div(_mk_mul(v, du), u)))
    if isinstance(e, Call):
        u = e.arg
        du = diff(u, var)
        if _is_num(du, 0.0):
            return Num(0.0)
        if e.func == "sin":
            outer = Call("cos", u)
        elif e.func == "cos":
            outer = Neg(Call("sin", u))
        elif e.func == "exp":
            outer = e
        elif e.func == "sqrt":
            outer = Div(Num(1.0), Mul(Num(2.0), e))
        elif e.func == "log":
            outer = Div(Num(1.0), u)
        else:
            raise ExprError(f"unknown function {e.func!r}")
        return _mk_mul(outer, du)
    raise TypeError(f"not an expression: {e!r}")


# --------------------------------------------------------------------------
# Printing

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(e: Expr) -> int:
    if isinstance(e, (Add, Sub)):
        return _PREC_ADD
    if isinstance(e, (Mul, Div)):
        return _PREC_MUL
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Pow):
        return _PREC_POW
    if isinstance(e, Num) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return _PREC_ADD  # printed with a sign, force parentheses
    return _PREC_ATOM


def _wrap(e: Expr, min_prec: int) -> str:
    s = to_string(e)
    return s if _prec(e) >= min_prec else f"({s})"


def _num_str(x: float) -> str:
    if math.isinf(x) or math.isnan(x):
        raise ExprError(f"cannot print non-finite literal {x!r}")
    return repr(x)


def _num_text(x: float) -> str:
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return _num_str(x)


def to_string(e: Expr) -> str:
    """Print ``e`` so that ``parse`` reproduces the same tree.

    The grammar has no negative literals, so ``Num(-c)`` comes back as
    ``Neg(Num(c))``; every other tree round-trips exactly.
    """
    if isinstance(e, Num):
        return _num_text(e.value)
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, Pi):
        return "pi"
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, _PREC_NEG)
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg)})"
    if isinstance(e, Pow):
        return f"{_wrap(e.base, _PREC_ATOM)}^{_wrap(e.exponent, _PREC_NEG)}"
    sym = _BINOP_SYMBOL[type(e)]
    p = _prec(e)
    spaced = f" {sym} " if p == _PREC_ADD else sym
    return f"{_wrap(e.left, p)}{spaced}{_wrap(e.right, p + 1)}"


# --------------------------------------------------------------------------
# Compilation to Python callables

def _emit(e: Expr, slots: Mapping[str, str], consts: Mapping[str, float]) -> str:
    if isinstance(e, Num):
        return f"({_num_str(e.value)})"
    if isinstance(e, Var):
        if e.name in slots:
            return slots[e.name]
        raise UnboundNameError(e.name)
    if isinstance(e, Param):
        if e.name in consts:
            return f"({_num_str(float(consts[e.name]))})"
        if e.name in slots:
            return slots[e.name]
        raise UnboundNameError(e.name)
    if isinstance(e, Pi):
        return "_pi"
    if isinstance(e, Neg):
        return f"(-{_emit(e.arg, slots, consts)})"
    if isinstance(e, Call):
        return f"_{e.func}({_emit(e.arg, slots, consts)})"
    if isinstance(e, Pow):
        return f"_pow({_emit(e.base, slots, consts)}, {_emit(e.exponent, slots, consts)})"
    sym = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
    return f"({_emit(e.left, slots, consts)} {sym} {_emit(e.right, slots, consts)})"


_COMPILE_NS = {
    "_sin": math.sin, "_cos": math.cos, "_exp": math.exp, "_sqrt": math.sqrt,
    "_log": math.log, "_pow": math.pow, "_pi": math.pi,
}


def compile_exprs(exprs: Sequence[Expr], argnames: Sequence[str],
                  consts: Mapping[str, float] | None = None
                  ) -> Callable[[Sequence[float]], tuple]:
    """Compile ``exprs`` into ``f(point) -> tuple`` of floats.

    ``point`` is a sequence ordered like ``argnames``; names in ``consts`` are
    baked in as literals.  Results are bit-identical to :func:`evaluate`.
    On an arithmetic failure the tree evaluator is rerun to raise a
    :class:`DomainError` naming the offending subexpression.
    """
    consts = dict(consts or {})
    exprs = tuple(exprs)
    argnames = tuple(argnames)
    slots = {name: f"_a{i}" for i, name in enumerate(argnames)}
    body = ", ".join(_emit(e, slots, consts) for e in exprs)
    unpack = ", ".join(slots[n] for n in argnames)
    lines = ["def _compiled(_p):"]
    if argnames:
        lines.append(f"    {unpack}{',' if len(argnames) == 1 else ''} = _p")
    lines.append(f"    return ({body}{',' if len(exprs) == 1 else ''})")
    ns = dict(_COMPILE_NS)
    exec("\n".join(lines), ns)
    raw = ns["_compiled"]

    def compiled(point):
        try:
            return raw(point)
        except (ValueError, ZeroDivisionError, OverflowError):
            env = dict(consts)
            env.update(zip(argnames, (float(v) for v in point)))
            for ex in exprs:
                evaluate(ex, env)
            raise

    compiled.exprs = exprs
    compiled.argnames = argnames
    return compiled


def compile_vectorized(exprs: Sequence[Expr], argnames: Sequence[str],
                       consts: Mapping[str, float] | None = None):
    """Compile ``exprs`` into ``f(points) -> array (npoints, len(exprs))``.

    Uses numpy ufuncs, so domain violations give nan instead of raising; meant
    for bulk diagnostics, not for the exact evaluator contract.
    """
    import numpy as np

    consts = dict(consts or {})
    slots = {name: f"_p[:, {i}]" for i, name in enumerate(argnames)}
    cols = ", ".join(f"_b({_emit(e, slots, consts)})" for e in exprs)
    src = f"def _compiled(_p):\n    return _stack([{cols}], axis=1)\n"
    ns = {"_sin": np.sin, "_cos": np.cos, "_exp": np.exp, "_sqrt": np.sqrt, "_log": np.log,
          "_pow": np.power, "_pi": math.pi, "_stack": np.stack}
    exec(src, ns)
    raw = ns["_compiled"]

    def compiled(points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        ns["_b"] = lambda v: np.broadcast_to(np.asarray(v, dtype=float), (p.shape[0],))
        return raw(p)

    return compiled

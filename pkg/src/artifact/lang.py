"""Abstract syntax, parser and canonical printer for the modelling language.

The language is a small imperative one with labelled sample statements::

    b = sample("b", Bernoulli(0.5))
    if b == 1 then
        m = sample("mu", Normal(0., 1.))
    else
        m = 1
    x = sample("x", Normal(m, 1.))

Statements are separated by newlines or ``;``.  The body of ``if``/``while``
is an indented block, a single statement on the same line, or a group
delimited by ``{ }`` or ``( )``.  A missing ``else`` means ``else skip``.
Inside ``( )`` and ``[ ]`` newlines are ignored; inside ``{ }`` they separate
statements but indentation is not significant.

Expression precedence, loosest first: ``c ? a : b``, ``or``, ``and``,
``not``, comparisons, ``+ -``, ``* / %``, unary minus, indexing ``v[i]``
and calls ``f(x)``.  ``[e, ...]`` builds a vector.  A minus sign directly
in front of a number literal is part of the literal.
"""

import json
import re
from dataclasses import dataclass, field

from . import builtins as _bi
from . import distributions as _dist


class ParseError(Exception):
    def __init__(self, msg, line=None, col=None):
        where = "" if line is None else " at line %d, column %d" % (line, col)
        super().__init__(msg + where)
        self.line = line
        self.col = col


# -- abstract syntax --------------------------------------------------------

def _typed(v):
    # distinguishes 1, 1.0 and True, which Python considers equal
    if type(v) is tuple:
        return (tuple, tuple(_typed(x) for x in v))
    return (type(v), v)


class Expr:
    __slots__ = ()


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value

    def __eq__(self, other):
        return type(other) is Const and _typed(self.value) == _typed(other.value)

    def __hash__(self):
        return hash(_typed(self.value))

    def __repr__(self):
        return "Const(%r)" % (self.value,)


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Call(Expr):
    op: str
    args: tuple


class Stmt:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Skip(Stmt):
    line: int = field(default=0, compare=False)


@dataclass(frozen=True, slots=True)
class Assign(Stmt):
    var: str
    expr: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True, slots=True)
class Sample(Stmt):
    var: str
    addr: Expr
    dist: str
    args: tuple
    line: int = field(default=0, compare=False)


@dataclass(frozen=True, slots=True)
class Seq(Stmt):
    first: Stmt
    second: Stmt
    line: int = field(default=0, compare=False)


@dataclass(frozen=True, slots=True)
class If(Stmt):
    cond: Expr
    then: Stmt
    orelse: Stmt
    line: int = field(default=0, compare=False)


@dataclass(frozen=True, slots=True)
class While(Stmt):
    cond: Expr
    body: Stmt
    line: int = field(default=0, compare=False)


def seq(stmts):
    """Right-nested sequence of a list of statements (``Skip`` if empty)."""
    stmts = list(stmts)
    if not stmts:
        return Skip()
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out, line=s.line)
    return out


def flatten(stmt):
    if isinstance(stmt, Seq):
        return flatten(stmt.first) + flatten(stmt.second)
    return [stmt]


def free_vars(e):
    """Variables read by an expression."""
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Call):
        out = set()
        for a in e.args:
            out |= free_vars(a)
        return out
    return set()


def variables(stmt):
    """Every variable name that occurs in a statement."""
    out = set()

    def walk(s):
        if isinstance(s, Assign):
            out.add(s.var)
            out.update(free_vars(s.expr))
        elif isinstance(s, Sample):
            out.add(s.var)
            out.update(free_vars(s.addr))
            for a in s.args:
                out.update(free_vars(a))
        elif isinstance(s, Seq):
            walk(s.first)
            walk(s.second)
        elif isinstance(s, If):
            out.update(free_vars(s.cond))
            walk(s.then)
            walk(s.orelse)
        elif isinstance(s, While):
            out.update(free_vars(s.cond))
            walk(s.body)

    walk(stmt)
    return out


# -- tokenizer --------------------------------------------------------------

KEYWORDS = frozenset(["if", "then", "else", "while", "do", "skip", "sample",
                      "true", "false", "null", "and", "or", "not"])

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>==|!=|<=|>=|[-+*/%<>=?:;,()\[\]{}])
""", re.VERBOSE)


@dataclass(slots=True)
class Tok:
    kind: str  # num str name kw op NEWLINE INDENT DEDENT EOF
    text: str
    line: int
    col: int
    value: object = None


def tokenize(src):
    toks = []
    brackets = []
    indents = [0]
    line = 1
    line_start = 0
    at_line_start = True
    pos = 0
    n = len(src)
    while pos < n:
        if at_line_start and not brackets:
            # measure indentation of a non-blank line
            m = re.compile(r"[ \t]*").match(src, pos)
            end = m.end()
            rest = src[end:end + 1]
            if rest in ("\n", "#", "") or src.startswith("\r\n", end):
                pos = end
                at_line_start = False
                continue
            width = len(m.group().expandtabs(4))
            if width > indents[-1]:
                indents.append(width)
                toks.append(Tok("INDENT", "", line, width + 1))
            while width < indents[-1]:
                indents.pop()
                toks.append(Tok("DEDENT", "", line, width + 1))
            if width != indents[-1]:
                raise ParseError("inconsistent indentation", line, width + 1)
            pos = end
            at_line_start = False
            continue
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ParseError("unexpected character %r" % src[pos], line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        pos = m.end()
        if kind in ("ws", "comment"):
            continue
        if kind == "nl":
            if not brackets or brackets[-1] == "{":
                if toks and toks[-1].kind not in ("NEWLINE", "INDENT", "DEDENT") or (toks and brackets):
                    toks.append(Tok("NEWLINE", "\n", line, col))
            line += 1
            line_start = pos
            at_line_start = True
            continue
        if kind == "num":
            value = float(text) if any(c in text for c in ".eE") else int(text)
            toks.append(Tok("num", text, line, col, value))
        elif kind == "str":
            try:
                value = json.loads(text)
            except ValueError:
                raise ParseError("bad string literal", line, col)
            toks.append(Tok("str", text, line, col, value))
        elif kind == "name":
            toks.append(Tok("kw" if text in KEYWORDS else "name", text, line, col))
        else:
            if text in "([{":
                brackets.append(text)
            elif text in ")]}":
                if not brackets or "([{"[")]}".index(text)] != brackets[-1]:
                    raise ParseError("unbalanced %r" % text, line, col)
                brackets.pop()
            toks.append(Tok("op", text, line, col))
    if brackets:
        raise ParseError("unclosed %r" % brackets[-1], line, pos - line_start + 1)
    if toks and toks[-1].kind not in ("NEWLINE", "DEDENT"):
        toks.append(Tok("NEWLINE", "\n", line, pos - line_start + 1))
    while len(indents) > 1:
        indents.pop()
        toks.append(Tok("DEDENT", "", line, 1))
    toks.append(Tok("EOF", "", line, pos - line_start + 1))
    return toks


# -- parser -----------------------------------------------------------------

_CMP = ("==", "!=", "<", "<=", ">", ">=")


class _Parser:
    def __init__(self, src):
        self.toks = tokenize(src)
        self.i = 0

    # token helpers
    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text, kind=None):
        t = self.peek()
        return t.text == text and (kind is None or t.kind == kind) and t.kind in ("op", "kw")

    def next(self):
        t = self.peek()
        self.i += 1
        return t

    def expect(self, text):
        t = self.next()
        if t.text != text or t.kind not in ("op", "kw"):
            raise ParseError("expected %r, found %r" % (text, t.text or t.kind), t.line, t.col)
        return t

    def fail(self, msg):
        t = self.peek()
        raise ParseError(msg + ", found %r" % (t.text or t.kind), t.line, t.col)

    # statements
    def program(self):
        body = self.stmts(("EOF",))
        if self.peek().kind != "EOF":
            self.fail("unexpected token")
        return body

    def _is_sep(self):
        t = self.peek()
        return t.kind == "NEWLINE" or (t.kind == "op" and t.text == ";")

    def _at_end(self, ends):
        t = self.peek()
        return t.kind in ends or (t.kind == "op" and t.text in ends)

    def stmts(self, ends):
        out = []
        while True:
            while self._is_sep():
                self.next()
            if self._at_end(ends):
                break
            out.append(self.stmt())
            if self._at_end(ends):
                break
            # an indented block ends with DEDENT, which also separates
            if not self._is_sep() and self.toks[self.i - 1].kind != "DEDENT":
                self.fail("expected newline or ';'")
        return seq(out)

    def stmt(self):
        t = self.peek()
        if t.kind == "kw" and t.text == "skip":
            self.next()
            return Skip(line=t.line)
        if t.kind == "kw" and t.text == "if":
            self.next()
            cond = self.expr()
            self.expect("then")
            then = self.block()
            orelse = None
            if self.at("else", "kw"):
                self.next()
                orelse = self.block()
            elif self.peek().kind == "NEWLINE" and self.peek(1).text == "else" and self.peek(1).kind == "kw":
                self.next()
                self.next()
                orelse = self.block()
            return If(cond, then, orelse if orelse is not None else Skip(line=t.line), line=t.line)
        if t.kind == "kw" and t.text == "while":
            self.next()
            cond = self.expr()
            self.expect("do")
            return While(cond, self.block(), line=t.line)
        if t.kind == "op" and t.text in ("{", "("):
            self.next()
            close = "}" if t.text == "{" else ")"
            body = self.stmts((close,))
            self.expect(close)
            return body
        if t.kind == "name":
            if self.peek(1).text != "=" or self.peek(1).kind != "op":
                self.fail("expected assignment")
            self.next()
            self.next()
            if self.at("sample", "kw"):
                return self.sample(t)
            return Assign(t.text, self.expr(), line=t.line)
        self.fail("expected statement")

    def block(self):
        if self.peek().kind == "NEWLINE" and self.peek(1).kind == "INDENT":
            self.next()
            self.next()
            body = self.stmts(("DEDENT",))
            if self.peek().kind != "DEDENT":
                self.fail("expected end of block")
            self.next()
            return body
        return self.stmt()

    def sample(self, target):
        self.expect("sample")
        self.expect("(")
        addr = self.expr()
        self.expect(",")
        d = self.next()
        name = _dist.resolve(d.text) if d.kind == "name" else None
        if name is None:
            raise ParseError("unknown distribution %r" % d.text, d.line, d.col)
        self.expect("(")
        args = self.args(")")
        self.expect(")")
        self.expect(")")
        arity = _dist.REGISTRY[name].arity
        if len(args) != arity:
            raise ParseError("%s takes %d arguments" % (name, arity), d.line, d.col)
        return Sample(target.text, addr, name, tuple(args), line=target.line)

    def args(self, close):
        out = []
        if self.at(close):
            return out
        out.append(self.expr())
        while self.at(","):
            self.next()
            out.append(self.expr())
        return out

    # expressions
    def expr(self):
        c = self.or_()
        if self.at("?"):
            self.next()
            a = self.expr()
            self.expect(":")
            b = self.expr()
            return Call("ite", (c, a, b))
        return c

    def or_(self):
        e = self.and_()
        while self.at("or", "kw"):
            self.next()
            e = Call("or", (e, self.and_()))
        return e

    def and_(self):
        e = self.not_()
        while self.at("and", "kw"):
            self.next()
            e = Call("and", (e, self.not_()))
        return e

    def not_(self):
        if self.at("not", "kw"):
            self.next()
            return Call("not", (self.not_(),))
        return self.cmp()

    def cmp(self):
        e = self.add()
        t = self.peek()
        if t.kind == "op" and t.text in _CMP:
            self.next()
            e = Call(t.text, (e, self.add()))
            t = self.peek()
            if t.kind == "op" and t.text in _CMP:
                self.fail("comparisons do not chain")
        return e

    def add(self):
        e = self.mul()
        while self.at("+") or self.at("-"):
            op = self.next().text
            e = Call(op, (e, self.mul()))
        return e

    def mul(self):
        e = self.unary()
        while self.at("*") or self.at("/") or self.at("%"):
            op = self.next().text
            e = Call(op, (e, self.unary()))
        return e

    def unary(self):
        if self.at("-"):
            self.next()
            if self.peek().kind == "num":
                return self.postfix(Const(-self.next().value))
            return Call("neg", (self.unary(),))
        return self.postfix(self.atom())

    def postfix(self, e):
        while self.at("["):
            self.next()
            i = self.expr()
            self.expect("]")
            e = Call("index", (e, i))
        return e

    def atom(self):
        t = self.next()
        if t.kind == "num" or t.kind == "str":
            return Const(t.value)
        if t.kind == "kw":
            if t.text == "true":
                return Const(True)
            if t.text == "false":
                return Const(False)
            if t.text == "null":
                return Const(None)
        if t.kind == "name":
            if self.at("("):
                name = _bi.resolve(t.text)
                if name is None or name in _bi.OPERATORS:
                    raise ParseError("unknown function %r" % t.text, t.line, t.col)
                self.next()
                args = self.args(")")
                self.expect(")")
                arity = _bi.BUILTINS[name][0]
                if arity is not None and len(args) != arity:
                    raise ParseError("%s takes %d arguments" % (name, arity), t.line, t.col)
                return Call(name, tuple(args))
            return Var(t.text)
        if t.kind == "op" and t.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "op" and t.text == "[":
            items = self.args("]")
            self.expect("]")
            if all(isinstance(x, Const) and type(x.value) in (int, float) for x in items):
                return Const(tuple(float(x.value) for x in items))
            return Call("vector", tuple(items))
        raise ParseError("expected expression, found %r" % (t.text or t.kind), t.line, t.col)


def parse(src):
    """Parse program text into a statement AST."""
    return _Parser(src).program()


def parse_expr(src):
    p = _Parser(src)
    e = p.expr()
    while p.peek().kind == "NEWLINE":
        p.next()
    if p.peek().kind != "EOF":
        p.fail("trailing input")
    return e


# -- printer ----------------------------------------------------------------

_BINARY_PREC = {"or": 2, "and": 3, "==": 5, "!=": 5, "<": 5, "<=": 5, ">": 5, ">=": 5,
                "+": 6, "-": 6, "*": 7, "/": 7, "%": 7}


def _prec(e):
    if isinstance(e, Call):
        if e.op == "ite":
            return 1
        if e.op in _BINARY_PREC:
            return _BINARY_PREC[e.op]
        if e.op == "not":
            return 4
        if e.op == "neg":
            return 8
        return 9
    if isinstance(e, Const) and type(e.value) in (int, float) and (e.value < 0 or str(e.value).startswith("-")):
        return 8
    return 10


def _const_text(v):
    if v is None:
        return "null"
    if v is True:
        return "true"
    if v is False:
        return "false"
    if type(v) is int:
        return str(v)
    if type(v) is float:
        if v != v or v in (float("inf"), float("-inf")):
            raise ValueError("non-finite constant has no source form")
        return repr(v)
    if type(v) is str:
        return json.dumps(v, ensure_ascii=False)
    if type(v) is tuple:
        return "[" + ", ".join(_const_text(x) for x in v) + "]"
    raise ValueError("not a language value: %r" % (v,))


def _wrap(e, min_prec):
    s = pp_expr(e)
    return "(" + s + ")" if _prec(e) < min_prec else s


def pp_expr(e):
    if isinstance(e, Const):
        return _const_text(e.value)
    if isinstance(e, Var):
        return e.name
    op, args = e.op, e.args
    if op == "ite":
        return "%s ? %s : %s" % (_wrap(args[0], 2), _wrap(args[1], 1), _wrap(args[2], 1))
    if op in _BINARY_PREC:
        p = _BINARY_PREC[op]
        left = p + 1 if p == 5 else p
        return "%s %s %s" % (_wrap(args[0], left), op, _wrap(args[1], p + 1))
    if op == "not":
        return "not " + _wrap(args[0], 4)
    if op == "neg":
        a = args[0]
        s = _wrap(a, 8)
        if s[:1].isdigit():
            # "-2" or "-2[i]" would lex as a negative literal
            return "-(" + s + ")"
        return "-" + s
    if op == "index":
        return "%s[%s]" % (_wrap(args[0], 9), pp_expr(args[1]))
    if op == "vector":
        return "[" + ", ".join(pp_expr(a) for a in args) + "]"
    return "%s(%s)" % (op, ", ".join(pp_expr(a) for a in args))


def pp_stmt(s):
    if isinstance(s, Skip):
        return "skip"
    if isinstance(s, Assign):
        return "%s = %s" % (s.var, pp_expr(s.expr))
    if isinstance(s, Sample):
        return "%s = sample(%s, %s(%s))" % (
            s.var, pp_expr(s.addr), s.dist, ", ".join(pp_expr(a) for a in s.args))
    raise TypeError("not a simple statement")


def pretty(stmt, indent="    "):
    """Canonical source text; ``parse(pretty(p)) == p`` for parsed programs."""
    lines = []

    def emit(s, depth):
        pad = indent * depth
        for part in flatten(s):
            if isinstance(part, If):
                lines.append("%sif %s then" % (pad, pp_expr(part.cond)))
                emit(part.then, depth + 1)
                lines.append(pad + "else")
                emit(part.orelse, depth + 1)
            elif isinstance(part, While):
                lines.append("%swhile %s do" % (pad, pp_expr(part.cond)))
                emit(part.body, depth + 1)
            else:
                lines.append(pad + pp_stmt(part))

    emit(stmt, 0)
    return "\n".join(lines) + "\n"

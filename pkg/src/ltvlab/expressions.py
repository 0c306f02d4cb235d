"""Tiny expression language for coefficient formulas in the step index n.

Grammar (one variable, five functions, four operators, unary minus):

    expr  := term (('+'|'-') term)*
    term  := unary (('*'|'/') unary)*
    unary := '-' unary | atom
    atom  := NUMBER | 'n' | FUNC '(' args ')' | '(' expr ')'
    FUNC  := sin | cos | ln | exp | pow      (pow takes two arguments)

Parsing is deterministic; errors carry line and column.  A parsed
expression can be evaluated at any n or compiled to a fast callable.
"""

import math
import re

from .errors import ParseError

_FUNCTIONS = {"sin": 1, "cos": 1, "ln": 1, "exp": 1, "pow": 2}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>[()+\-*/,]))"
)


class Expression:
    """A parsed formula over the variable n."""

    def __init__(self, node, source):
        self._node = node
        self.source = source
        self._fn = _compile_node(node)

    def __call__(self, n):
        return self._fn(n)

    def evaluate(self, n):
        return self._fn(n)

    def __repr__(self):
        return f"Expression({self.source!r})"


def _tokenize(text):
    tokens = []
    line, col_base = 1, 0
    pos = 0
    while pos < len(text):
        # track line numbers through skipped whitespace
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad_pos = len(text) - len(stripped)
            line = text.count("\n", 0, bad_pos) + 1
            col = bad_pos - (text.rfind("\n", 0, bad_pos) + 1) + 1
            raise ParseError(f"unexpected character {stripped[0]!r}", line, col)
        start = m.start(m.lastgroup)
        line = text.count("\n", 0, start) + 1
        col = start - (text.rfind("\n", 0, start) + 1) + 1
        tokens.append((m.lastgroup, m.group(m.lastgroup), line, col))
        pos = m.end()
    tokens.append(("end", "", line, col_base + len(text) - (text.rfind("\n") + 1) + 1))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, val, line, col = self.peek()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", line, col)
        return self.next()

    def parse(self):
        node = self.expr()
        kind, val, line, col = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {val!r}", line, col)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            rhs = self.term()
            node = (op, node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.next()[1]
            rhs = self.unary()
            node = (op, node, rhs)
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.next()
            return ("neg", self.unary())
        return self.atom()

    def atom(self):
        kind, val, line, col = self.next()
        if kind == "number":
            return ("lit", float(val))
        if kind == "name":
            if val == "n":
                return ("var",)
            if val in _FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.next()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != _FUNCTIONS[val]:
                    raise ParseError(
                        f"{val} takes {_FUNCTIONS[val]} argument(s), got {len(args)}", line, col
                    )
                return (val, *args)
            raise ParseError(f"unknown function or variable {val!r}", line, col)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected token {val or 'end of input'!r}", line, col)


def _render(node):
    kind = node[0]
    if kind == "lit":
        return repr(node[1])
    if kind == "var":
        return "n"
    if kind == "neg":
        return f"(-{_render(node[1])})"
    if kind in ("+", "-", "*", "/"):
        return f"({_render(node[1])}{kind}{_render(node[2])})"
    if kind == "ln":
        return f"_log({_render(node[1])})"
    if kind == "pow":
        return f"({_render(node[1])}**{_render(node[2])})"
    return f"_{kind}({_render(node[1])})"


def _compile_node(node):
    env = {"_sin": math.sin, "_cos": math.cos, "_log": math.log, "_exp": math.exp}
    return eval(f"lambda n: {_render(node)}", env)  # code generated from our own AST


def parse_expression(text):
    """Parse ``text`` into an Expression.  Raises ParseError on bad input."""
    tokens = _tokenize(text)
    node = _Parser(tokens).parse()
    return Expression(node, text.strip())

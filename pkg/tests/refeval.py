"""Direct-evaluating recursive-descent reference for the coefficient grammar (no tree, scalar math)."""

import math

FUNCS = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "sqrt": math.sqrt, "abs": abs}


class RefEval:
    def __init__(self, text, x, y):
        self.s = text
        self.i = 0
        self.env = {"x": x, "y": y, "pi": math.pi}

    def ws(self):
        while self.i < len(self.s) and self.s[self.i].isspace():
            self.i += 1

    def peek(self):
        self.ws()
        return self.s[self.i] if self.i < len(self.s) else ""

    def run(self):
        v = self.expr()
        if self.peek():
            raise SyntaxError(self.i)
        return v

    def expr(self):
        v = self.term()
        while self.peek() in ("+", "-") and self.peek():
            op = self.s[self.i]
            self.i += 1
            r = self.term()
            v = v + r if op == "+" else v - r
        return v

    def term(self):
        v = self.factor()
        while self.peek() in ("*", "/") and self.peek():
            op = self.s[self.i]
            self.i += 1
            r = self.factor()
            v = v * r if op == "*" else v / r
        return v

    def factor(self):
        b = self.atom()
        if self.peek() == "^":
            self.i += 1
            return b ** self.factor()
        return b

    def atom(self):
        c = self.peek()
        if c == "-":
            self.i += 1
            return -self.atom()
        if c == "(":
            self.i += 1
            v = self.expr()
            assert self.peek() == ")"
            self.i += 1
            return v
        if c.isdigit() or c == ".":
            j = self.i
            while j < len(self.s) and (self.s[j].isdigit() or self.s[j] == "."):
                j += 1
            if j < len(self.s) and self.s[j] in "eE":
                j += 1
                if self.s[j] in "+-":
                    j += 1
                while j < len(self.s) and self.s[j].isdigit():
                    j += 1
            v = float(self.s[self.i:j])
            self.i = j
            return v
        if c.isalpha():
            j = self.i
            while j < len(self.s) and self.s[j].isalnum():
                j += 1
            name = self.s[self.i:j]
            self.i = j
            if name in FUNCS:
                assert self.peek() == "("
                self.i += 1
                v = self.expr()
                assert self.peek() == ")"
                self.i += 1
                return FUNCS[name](v)
            return self.env[name]
        raise SyntaxError(self.i)


def ref_eval(text, x, y):
    return RefEval(text, x, y).run()

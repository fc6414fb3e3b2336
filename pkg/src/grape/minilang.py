"""Lexer, parser, and AST for the mini procedural language.

The language covers functions, typed declarations, assignments, calls,
``if``/``else``, ``while``, ``return``, integer and string literals, and the
usual arithmetic/comparison/logic operators.  It is deliberately small: the
graph pipeline only needs enough surface syntax to exercise AST/CFG/CDG/DDG
construction, and externally extracted graphs can be imported as JSON.
"""

from dataclasses import dataclass, field

KEYWORDS = {"if", "else", "while", "return", "int", "void", "string"}
TYPE_NAMES = {"int", "void", "string"}

# Library calls that naming normalization leaves untouched.
BUILTINS = {"print", "read", "source", "sink", "sanitize", "len"}

_TWO_CHAR_OPS = ("==", "!=", "<=", ">=", "&&", "||")
_ONE_CHAR_OPS = "+-*/%<>=!"
_PUNCT = "(){},;"


class MiniSyntaxError(Exception):
    """Raised on any lexical or syntactic error, carrying line/column."""

    def __init__(self, message, line, col):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, NUMBER, STRING, OP, PUNCT, KEYWORD
    text: str
    line: int
    col: int
    pos: int  # character offset of the token start in the source


def lex(source: str) -> list[Token]:
    tokens = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        start, start_line, start_col = i, line, col
        if ch.isalpha() or ch == "_":
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            text = source[start:i]
            kind = "KEYWORD" if text in KEYWORDS else "IDENT"
            tokens.append(Token(kind, text, start_line, start_col, start))
            col += i - start
            continue
        if ch.isdigit():
            while i < n and source[i].isdigit():
                i += 1
            tokens.append(Token("NUMBER", source[start:i], start_line, start_col, start))
            col += i - start
            continue
        if ch == '"':
            i += 1
            while i < n and source[i] != '"':
                if source[i] == "\n":
                    raise MiniSyntaxError("unterminated string literal", start_line, start_col)
                i += 1
            if i >= n:
                raise MiniSyntaxError("unterminated string literal", start_line, start_col)
            i += 1
            tokens.append(Token("STRING", source[start:i], start_line, start_col, start))
            col += i - start
            continue
        two = source[i:i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(Token("OP", two, start_line, start_col, start))
            i += 2
            col += 2
            continue
        if ch in _ONE_CHAR_OPS:
            tokens.append(Token("OP", ch, start_line, start_col, start))
            i += 1
            col += 1
            continue
        if ch in _PUNCT:
            tokens.append(Token("PUNCT", ch, start_line, start_col, start))
            i += 1
            col += 1
            continue
        raise MiniSyntaxError(f"unexpected character {ch!r}", line, col)
    return tokens


@dataclass
class Ast:
    """A syntax-tree node: ``kind`` matches the CPG node-kind vocabulary."""

    kind: str
    line: int
    code: str
    children: list["Ast"] = field(default_factory=list)
    name: str | None = None  # function name, declared/assigned variable, callee
    ctrl: str | None = None  # "if" or "while" on CONTROL_STRUCTURE nodes
    type_name: str | None = None  # declared type on METHOD/PARAM/LOCAL nodes


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = lex(source)
        self.i = 0

    # -- token helpers -------------------------------------------------

    def _peek(self) -> Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _next(self) -> Token:
        tok = self._peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else None
            line = last.line if last else 1
            col = last.col + len(last.text) if last else 1
            raise MiniSyntaxError("unexpected end of input", line, col)
        self.i += 1
        return tok

    def _expect(self, text: str) -> Token:
        tok = self._next()
        if tok.text != text:
            raise MiniSyntaxError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def _at(self, text: str) -> bool:
        tok = self._peek()
        return tok is not None and tok.text == text

    def _span(self, start_tok: Token, end_exclusive_index: int) -> str:
        end_tok = self.tokens[end_exclusive_index - 1]
        return self.source[start_tok.pos:end_tok.pos + len(end_tok.text)]

    # -- grammar -------------------------------------------------------

    def parse_program(self) -> list[Ast]:
        functions = []
        while self._peek() is not None:
            functions.append(self.parse_function())
        return functions

    def parse_function(self) -> Ast:
        start = self._peek()
        if start is None or start.text not in TYPE_NAMES:
            tok = start or Token("", "", 1, 1, 0)
            raise MiniSyntaxError(f"expected a function definition, found {tok.text!r}",
                                  tok.line, tok.col)
        ret_type = self._next()
        name_tok = self._next()
        if name_tok.kind != "IDENT":
            raise MiniSyntaxError(f"expected function name, found {name_tok.text!r}",
                                  name_tok.line, name_tok.col)
        self._expect("(")
        params = []
        if not self._at(")"):
            while True:
                ptype = self._next()
                if ptype.text not in TYPE_NAMES:
                    raise MiniSyntaxError(f"expected parameter type, found {ptype.text!r}",
                                          ptype.line, ptype.col)
                pname = self._next()
                if pname.kind != "IDENT":
                    raise MiniSyntaxError(f"expected parameter name, found {pname.text!r}",
                                          pname.line, pname.col)
                params.append(Ast("PARAM", pname.line, f"{ptype.text} {pname.text}",
                                  name=pname.text, type_name=ptype.text))
                if self._at(","):
                    self._next()
                else:
                    break
        close = self._expect(")")
        signature = self._span(ret_type, self.i)
        body = self.parse_block()
        method = Ast("METHOD", start.line, signature, name=name_tok.text,
                     type_name=ret_type.text)
        method.children = params + [body]
        del close
        return method

    def parse_block(self) -> Ast:
        open_tok = self._expect("{")
        stmts = []
        while not self._at("}"):
            if self._peek() is None:
                raise MiniSyntaxError("unterminated block", open_tok.line, open_tok.col)
            stmts.append(self.parse_statement())
        self._expect("}")
        return Ast("BLOCK", open_tok.line, "", children=stmts)

    def parse_statement(self) -> Ast:
        tok = self._peek()
        assert tok is not None
        if tok.text == "{":
            return self.parse_block()
        if tok.text in ("if", "while"):
            return self._parse_control(tok.text)
        if tok.text == "return":
            return self._parse_return()
        if tok.text in TYPE_NAMES:
            return self._parse_declaration()
        if tok.kind == "IDENT":
            nxt = self.tokens[self.i + 1] if self.i + 1 < len(self.tokens) else None
            if nxt is not None and nxt.text == "=":
                return self._parse_assignment()
            if nxt is not None and nxt.text == "(":
                expr = self.parse_expression()
                self._expect(";")
                return expr  # a CALL node used in statement position
        raise MiniSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)

    def _parse_control(self, keyword: str) -> Ast:
        kw = self._expect(keyword)
        self._expect("(")
        cond_start = self.i
        cond = self.parse_expression()
        cond_src = self._span(self.tokens[cond_start], self.i)
        self._expect(")")
        node = Ast("CONTROL_STRUCTURE", kw.line, f"{keyword} ({cond_src})", ctrl=keyword)
        node.children = [cond, self.parse_statement()]
        if keyword == "if" and self._at("else"):
            self._next()
            node.children.append(self.parse_statement())
        return node

    def _parse_return(self) -> Ast:
        kw = self._expect("return")
        children = []
        if not self._at(";"):
            children.append(self.parse_expression())
        end = self.i
        self._expect(";")
        return Ast("RETURN", kw.line, self._span(kw, end), children=children)

    def _parse_declaration(self) -> Ast:
        type_tok = self._next()
        name_tok = self._next()
        if name_tok.kind != "IDENT":
            raise MiniSyntaxError(f"expected variable name, found {name_tok.text!r}",
                                  name_tok.line, name_tok.col)
        children = []
        if self._at("="):
            self._next()
            children.append(self.parse_expression())
        end = self.i
        self._expect(";")
        return Ast("LOCAL", type_tok.line, self._span(type_tok, end),
                   children=children, name=name_tok.text, type_name=type_tok.text)

    def _parse_assignment(self) -> Ast:
        name_tok = self._next()
        lhs = Ast("IDENTIFIER", name_tok.line, name_tok.text, name=name_tok.text)
        self._expect("=")
        rhs = self.parse_expression()
        end = self.i
        self._expect(";")
        return Ast("ASSIGNMENT", name_tok.line, self._span(name_tok, end),
                   children=[lhs, rhs], name=name_tok.text)

    # Expression precedence, loosest first.
    _LEVELS = (("||",), ("&&",), ("==", "!="), ("<", "<=", ">", ">="),
               ("+", "-"), ("*", "/", "%"))

    def parse_expression(self, level: int = 0) -> Ast:
        if level == len(self._LEVELS):
            return self._parse_unary()
        start = self.i
        node = self.parse_expression(level + 1)
        while True:
            tok = self._peek()
            if tok is None or tok.text not in self._LEVELS[level]:
                return node
            op = self._next()
            rhs = self.parse_expression(level + 1)
            code = self._span(self.tokens[start], self.i)
            node = Ast("OPERATOR", op.line, code, children=[node, rhs], name=op.text)

    def _parse_unary(self) -> Ast:
        tok = self._peek()
        if tok is not None and tok.text in ("-", "!"):
            op = self._next()
            operand = self._parse_unary()
            return Ast("OPERATOR", op.line, f"{op.text}{operand.code}",
                       children=[operand], name=op.text)
        return self._parse_primary()

    def _parse_primary(self) -> Ast:
        tok = self._next()
        if tok.text == "(":
            inner = self.parse_expression()
            self._expect(")")
            return inner
        if tok.kind == "NUMBER" or tok.kind == "STRING":
            return Ast("LITERAL", tok.line, tok.text)
        if tok.kind == "IDENT":
            if self._at("("):
                return self._parse_call(tok)
            return Ast("IDENTIFIER", tok.line, tok.text, name=tok.text)
        raise MiniSyntaxError(f"unexpected token {tok.text!r} in expression", tok.line, tok.col)

    def _parse_call(self, name_tok: Token) -> Ast:
        self._expect("(")
        args = []
        if not self._at(")"):
            while True:
                args.append(self.parse_expression())
                if self._at(","):
                    self._next()
                else:
                    break
        end_index = self.i
        self._expect(")")
        code = self._span(name_tok, end_index + 1)
        return Ast("CALL", name_tok.line, code, children=args, name=name_tok.text)


def parse_mini(source: str) -> list[Ast]:
    """Parse a source file into one AST per function.

    Raises :class:`MiniSyntaxError` with line/column diagnostics on bad input.
    """
    return _Parser(source).parse_program()

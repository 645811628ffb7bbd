"""Recursive-descent parser for muPVS with skip-to-declaration recovery.

The parser is total: any input yields a ParseResult with a (possibly
partial) AST and diagnostics. On a syntax error inside a declaration it
emits one diagnostic and resynchronizes at the next token that can start
a declaration (or IMPORTING/END), so every well-formed prefix of
declarations survives into the AST.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import syntax as S
from .lexer import Token, TokenKind, lex
from .positions import Diagnostic, Range, Severity, SourcePos, span

FORMULA_KEYWORDS = {"THEOREM": S.FormulaKind.THEOREM, "LEMMA": S.FormulaKind.LEMMA,
                    "CONJECTURE": S.FormulaKind.CONJECTURE}

_CMP_OPS = ("=", "/=", "<", "<=", ">", ">=")

# Connective keywords the built-in library is allowed to declare by name so
# hover and completion have real declaration sites to point at.
CONNECTIVE_NAMES = frozenset({"NOT", "AND", "OR", "IMPLIES", "IFF"})


@dataclass(frozen=True)
class ParseResult:
    ast: S.SourceFile
    diagnostics: list[Diagnostic]
    tokens: list[Token]


class _ParseError(Exception):
    def __init__(self, message: str, rng: Range):
        super().__init__(message)
        self.message = message
        self.range = rng


class _Parser:
    def __init__(self, tokens: list[Token], end_pos: SourcePos, connective_decls: bool = False):
        self.tokens = [t for t in tokens if t.kind is not TokenKind.COMMENT]
        self.pos = 0
        self.diagnostics: list[Diagnostic] = []
        self.end_range = Range(end_pos, end_pos)
        self.connective_decls = connective_decls

    # -- token plumbing ----------------------------------------------------

    def peek(self, offset: int = 0) -> Token | None:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def at(self, kind: TokenKind, lexeme: str | None = None, offset: int = 0) -> bool:
        t = self.peek(offset)
        return t is not None and t.kind is kind and (lexeme is None or t.lexeme == lexeme)

    def at_keyword(self, *names: str) -> bool:
        t = self.peek()
        return t is not None and t.kind is TokenKind.KEYWORD and t.lexeme in names

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def here(self) -> Range:
        t = self.peek()
        return t.range if t is not None else self.end_range

    def fail(self, message: str) -> _ParseError:
        t = self.peek()
        if t is not None:
            return _ParseError(f"{message}, found {t.lexeme!r}", t.range)
        return _ParseError(f"{message}, found end of file", self.end_range)

    def expect(self, kind: TokenKind, lexeme: str | None = None, what: str | None = None) -> Token:
        if self.at(kind, lexeme):
            return self.advance()
        raise self.fail(f"expected {what or lexeme or kind.value}")

    def expect_keyword(self, name: str) -> Token:
        return self.expect(TokenKind.KEYWORD, name)

    def diag(self, err: _ParseError) -> None:
        self.diagnostics.append(Diagnostic(err.range, Severity.ERROR, err.message, "parser"))

    # -- file / theory -----------------------------------------------------

    def parse_file(self) -> S.SourceFile:
        theories: list[S.Theory] = []
        while self.peek() is not None:
            if self._at_theory_header():
                try:
                    theories.append(self.parse_theory())
                except _ParseError as err:
                    # A mangled header tail (no BEGIN, stray tokens): record
                    # it, step off the header so recovery cannot stall, and
                    # hunt for the next one.
                    self.diag(err)
                    if self.peek() is not None:
                        self.advance()
                    self._skip_to_theory_header()
            else:
                self.diag(self.fail("expected a theory declaration ('name: THEORY')"))
                self._skip_to_theory_header()
        first = theories[0].range if theories else self.end_range
        last = theories[-1].range if theories else self.end_range
        return S.SourceFile(tuple(theories), span(first, last))

    def _at_theory_header(self) -> bool:
        return (
            self.at(TokenKind.IDENTIFIER)
            and self.at(TokenKind.PUNCTUATION, ":", offset=1)
            and self.at(TokenKind.KEYWORD, "THEORY", offset=2)
        )

    def _skip_to_theory_header(self) -> None:
        while self.peek() is not None and not self._at_theory_header():
            self.advance()

    def parse_theory(self) -> S.Theory:
        name_tok = self.expect(TokenKind.IDENTIFIER, what="theory name")
        self.expect(TokenKind.PUNCTUATION, ":")
        self.expect_keyword("THEORY")
        self.expect_keyword("BEGIN")
        importings: list[S.Importing] = []
        decls: list[S.Decl] = []
        end_range = self.here()
        while True:
            if self.peek() is None:
                self.diag(self.fail("expected END to close theory"))
                end_range = self.end_range
                break
            if self.at_keyword("END"):
                end_tok = self.advance()
                end_range = end_tok.range
                if self.at(TokenKind.IDENTIFIER):
                    end_name = self.advance()
                    end_range = end_name.range
                    if end_name.lexeme != name_tok.lexeme:
                        self.diagnostics.append(
                            Diagnostic(
                                end_name.range,
                                Severity.ERROR,
                                f"theory name mismatch: expected {name_tok.lexeme!r}, "
                                f"found {end_name.lexeme!r}",
                                "parser",
                            )
                        )
                else:
                    self.diag(self.fail("expected theory name after END"))
                break
            try:
                if self.at_keyword("IMPORTING"):
                    importings.extend(self.parse_importing())
                else:
                    decls.append(self.parse_decl())
            except _ParseError as err:
                self.diag(err)
                self._recover_in_theory()
        return S.Theory(
            name_tok.lexeme,
            tuple(importings),
            tuple(decls),
            span(name_tok.range, end_range),
            name_tok.range,
        )

    def _recover_in_theory(self) -> None:
        """Skip to the next plausible declaration start, IMPORTING, or END."""
        while self.peek() is not None:
            if self.at_keyword("END", "IMPORTING"):
                return
            if self.at(TokenKind.IDENTIFIER) and (
                self.at(TokenKind.PUNCTUATION, ":", offset=1)
                or self.at(TokenKind.PUNCTUATION, "(", offset=1)
            ):
                return
            self.advance()

    def parse_importing(self) -> list[S.Importing]:
        kw = self.expect_keyword("IMPORTING")
        out = [S.Importing(*self._importing_name(kw.range))]
        while self.at(TokenKind.PUNCTUATION, ","):
            self.advance()
            out.append(S.Importing(*self._importing_name(kw.range)))
        return out

    def _importing_name(self, kw_range: Range) -> tuple[str, Range]:
        tok = self.expect(TokenKind.IDENTIFIER, what="imported theory name")
        return tok.lexeme, span(kw_range, tok.range)

    # -- declarations ------------------------------------------------------

    def parse_decl(self) -> S.Decl:
        if (
            self.connective_decls
            and self.at_keyword(*CONNECTIVE_NAMES)
            and self.at(TokenKind.PUNCTUATION, ":", offset=1)
        ):
            name_tok = self.advance()
        else:
            name_tok = self.expect(TokenKind.IDENTIFIER, what="declaration name")
        if self.at(TokenKind.PUNCTUATION, "("):
            return self._parse_fundef(name_tok)
        self.expect(TokenKind.PUNCTUATION, ":")
        if self.at_keyword("TYPE"):
            self.advance()
            definition = None
            end = self.tokens[self.pos - 1].range
            if self.at(TokenKind.OPERATOR, "="):
                self.advance()
                definition = self.parse_type()
                end = definition.range
            return S.TypeDecl(name_tok.lexeme, definition, span(name_tok.range, end), name_tok.range)
        if self.peek() is not None and self.peek().lexeme in FORMULA_KEYWORDS:
            kind = FORMULA_KEYWORDS[self.advance().lexeme]
            body = self.parse_expr()
            return S.FormulaDecl(
                name_tok.lexeme, kind, body, span(name_tok.range, body.range), name_tok.range
            )
        ty = self.parse_type()
        body = None
        end = ty.range
        if self.at(TokenKind.OPERATOR, "="):
            self.advance()
            body = self.parse_expr()
            end = body.range
        return S.ConstDecl(name_tok.lexeme, ty, body, span(name_tok.range, end), name_tok.range)

    def _parse_fundef(self, name_tok: Token) -> S.FunDef:
        self.expect(TokenKind.PUNCTUATION, "(")
        params = self.parse_param_groups()
        self.expect(TokenKind.PUNCTUATION, ")")
        self.expect(TokenKind.PUNCTUATION, ":")
        recursive = False
        if self.at_keyword("RECURSIVE"):
            self.advance()
            recursive = True
        return_type = self.parse_type()
        self.expect(TokenKind.OPERATOR, "=")
        body = self.parse_expr()
        if not recursive:
            pnames = {p.name for p in params}
            recursive = name_tok.lexeme not in pnames and name_tok.lexeme in S.free_names(body)
        return S.FunDef(
            name_tok.lexeme,
            tuple(params),
            return_type,
            body,
            recursive,
            span(name_tok.range, body.range),
            name_tok.range,
        )

    def parse_param_groups(self) -> list[S.Param]:
        """Parse ``x, y: int, z: bool`` into flat per-name Params."""
        params: list[S.Param] = []
        while True:
            group: list[Token] = [self.expect(TokenKind.IDENTIFIER, what="parameter name")]
            while self.at(TokenKind.PUNCTUATION, ","):
                save = self.pos
                self.advance()
                if self.at(TokenKind.IDENTIFIER):
                    group.append(self.advance())
                else:
                    self.pos = save
                    break
            self.expect(TokenKind.PUNCTUATION, ":")
            ty = self.parse_type()
            for tok in group:
                params.append(S.Param(tok.lexeme, ty, span(tok.range, ty.range), tok.range))
            if self.at(TokenKind.PUNCTUATION, ","):
                self.advance()
                continue
            return params

    # -- types -------------------------------------------------------------

    def parse_type(self) -> S.TypeExpr:
        t = self.peek()
        if t is None:
            raise self.fail("expected a type")
        if t.kind is TokenKind.KEYWORD and t.lexeme in S.BASE_TYPE_NAMES:
            self.advance()
            return S.BaseType(t.lexeme, t.range)
        if t.kind is TokenKind.IDENTIFIER:
            self.advance()
            return S.NamedType(t.lexeme, t.range)
        if self.at(TokenKind.PUNCTUATION, "[#"):
            open_tok = self.advance()
            fields = [self._parse_field_decl()]
            while self.at(TokenKind.PUNCTUATION, ","):
                self.advance()
                fields.append(self._parse_field_decl())
            close = self.expect(TokenKind.PUNCTUATION, "#]")
            return S.RecordType(tuple(fields), span(open_tok.range, close.range))
        if self.at(TokenKind.PUNCTUATION, "["):
            open_tok = self.advance()
            tys = [self.parse_type()]
            while self.at(TokenKind.PUNCTUATION, ","):
                self.advance()
                tys.append(self.parse_type())
            self.expect(TokenKind.OPERATOR, "->")
            result = self.parse_type()
            close = self.expect(TokenKind.PUNCTUATION, "]")
            return S.FunctionType(tuple(tys), result, span(open_tok.range, close.range))
        if self.at(TokenKind.PUNCTUATION, "{"):
            open_tok = self.advance()
            var = self.expect(TokenKind.IDENTIFIER, what="subtype variable")
            self.expect(TokenKind.PUNCTUATION, ":")
            base = self.parse_type()
            self.expect(TokenKind.OPERATOR, "|")
            pred = self.parse_expr()
            close = self.expect(TokenKind.PUNCTUATION, "}")
            return S.SubtypeType(var.lexeme, base, pred, span(open_tok.range, close.range))
        raise self.fail("expected a type")

    def _parse_field_decl(self) -> S.FieldDecl:
        name = self.expect(TokenKind.IDENTIFIER, what="field name")
        self.expect(TokenKind.PUNCTUATION, ":")
        ty = self.parse_type()
        return S.FieldDecl(name.lexeme, ty, span(name.range, ty.range))

    # -- expressions -------------------------------------------------------

    def parse_expr(self) -> S.Expr:
        return self._parse_iff()

    def _parse_iff(self) -> S.Expr:
        left = self._parse_implies()
        while self.at_keyword("IFF"):
            self.advance()
            right = self._parse_implies()
            left = S.InfixOp("IFF", left, right, span(left.range, right.range))
        return left

    def _parse_implies(self) -> S.Expr:
        left = self._parse_or()
        if self.at_keyword("IMPLIES"):
            self.advance()
            right = self._parse_implies()  # right-associative
            return S.InfixOp("IMPLIES", left, right, span(left.range, right.range))
        return left

    def _parse_or(self) -> S.Expr:
        left = self._parse_and()
        while self.at_keyword("OR"):
            self.advance()
            right = self._parse_and()
            left = S.InfixOp("OR", left, right, span(left.range, right.range))
        return left

    def _parse_and(self) -> S.Expr:
        left = self._parse_not()
        while self.at_keyword("AND"):
            self.advance()
            right = self._parse_not()
            left = S.InfixOp("AND", left, right, span(left.range, right.range))
        return left

    def _parse_not(self) -> S.Expr:
        if self.at_keyword("NOT"):
            tok = self.advance()
            operand = self._parse_not()
            return S.PrefixOp("NOT", operand, span(tok.range, operand.range))
        return self._parse_cmp()

    def _parse_cmp(self) -> S.Expr:
        left = self._parse_add()
        t = self.peek()
        if t is not None and t.kind is TokenKind.OPERATOR and t.lexeme in _CMP_OPS:
            self.advance()
            right = self._parse_add()
            return S.InfixOp(t.lexeme, left, right, span(left.range, right.range))
        return left

    def _parse_add(self) -> S.Expr:
        left = self._parse_mul()
        while self.at(TokenKind.OPERATOR, "+") or self.at(TokenKind.OPERATOR, "-"):
            op = self.advance().lexeme
            right = self._parse_mul()
            left = S.InfixOp(op, left, right, span(left.range, right.range))
        return left

    def _parse_mul(self) -> S.Expr:
        left = self._parse_unary()
        while self.at(TokenKind.OPERATOR, "*") or self.at(TokenKind.OPERATOR, "/"):
            op = self.advance().lexeme
            right = self._parse_unary()
            left = S.InfixOp(op, left, right, span(left.range, right.range))
        return left

    def _parse_unary(self) -> S.Expr:
        if self.at(TokenKind.OPERATOR, "-"):
            tok = self.advance()
            operand = self._parse_unary()
            return S.PrefixOp("-", operand, span(tok.range, operand.range))
        return self._parse_postfix()

    def _parse_postfix(self) -> S.Expr:
        expr = self._parse_atom()
        while True:
            if self.at(TokenKind.PUNCTUATION, "("):
                self.advance()
                args = [self.parse_expr()]
                while self.at(TokenKind.PUNCTUATION, ","):
                    self.advance()
                    args.append(self.parse_expr())
                close = self.expect(TokenKind.PUNCTUATION, ")")
                expr = S.Apply(expr, tuple(args), span(expr.range, close.range))
            elif self.at(TokenKind.BACKTICK):
                self.advance()
                field = self.expect(TokenKind.IDENTIFIER, what="field name after '`'")
                expr = S.FieldAccess(expr, field.lexeme, span(expr.range, field.range), field.range)
            else:
                return expr

    def _parse_atom(self) -> S.Expr:
        t = self.peek()
        if t is None:
            raise self.fail("expected an expression")
        if t.kind is TokenKind.NUMBER:
            self.advance()
            if "." in t.lexeme:
                whole, frac = t.lexeme.split(".")
                value: int | Fraction = Fraction(int(whole + frac), 10 ** len(frac))
            else:
                value = int(t.lexeme)
            return S.NumberLit(value, t.range)
        if t.kind is TokenKind.STRING:
            self.advance()
            body = t.lexeme[1:-1] if t.lexeme.endswith('"') and len(t.lexeme) >= 2 else t.lexeme[1:]
            return S.StringLit(body, t.range)
        if t.kind is TokenKind.KEYWORD:
            if t.lexeme == "TRUE":
                self.advance()
                return S.BoolLit(True, t.range)
            if t.lexeme == "FALSE":
                self.advance()
                return S.BoolLit(False, t.range)
            if t.lexeme == "IF":
                return self._parse_if(self.advance())
            if t.lexeme in ("FORALL", "EXISTS"):
                return self._parse_binder(self.advance())
            if t.lexeme == "LET":
                return self._parse_let(self.advance())
            raise self.fail("expected an expression")
        if t.kind is TokenKind.IDENTIFIER:
            self.advance()
            return S.NameRef(t.lexeme, t.range)
        if self.at(TokenKind.PUNCTUATION, "(#"):
            open_tok = self.advance()
            inits = [self._parse_field_init()]
            while self.at(TokenKind.PUNCTUATION, ","):
                self.advance()
                inits.append(self._parse_field_init())
            close = self.expect(TokenKind.PUNCTUATION, "#)")
            return S.RecordLit(tuple(inits), span(open_tok.range, close.range))
        if self.at(TokenKind.PUNCTUATION, "("):
            self.advance()
            inner = self.parse_expr()
            self.expect(TokenKind.PUNCTUATION, ")")
            return inner
        raise self.fail("expected an expression")

    def _parse_if(self, if_tok: Token) -> S.Expr:
        cond = self.parse_expr()
        self.expect_keyword("THEN")
        then = self.parse_expr()
        self.expect_keyword("ELSE")
        els = self.parse_expr()
        end = self.expect_keyword("ENDIF")
        return S.IfExpr(cond, then, els, span(if_tok.range, end.range))

    def _parse_binder(self, kw: Token) -> S.Expr:
        kind = S.BinderKind.FORALL if kw.lexeme == "FORALL" else S.BinderKind.EXISTS
        self.expect(TokenKind.PUNCTUATION, "(")
        params = self.parse_param_groups()
        self.expect(TokenKind.PUNCTUATION, ")")
        self.expect(TokenKind.PUNCTUATION, ":")
        body = self.parse_expr()
        return S.Binder(kind, tuple(params), body, span(kw.range, body.range))

    def _parse_let(self, let_tok: Token) -> S.Expr:
        var = self.expect(TokenKind.IDENTIFIER, what="LET variable")
        ty = None
        if self.at(TokenKind.PUNCTUATION, ":"):
            self.advance()
            ty = self.parse_type()
        self.expect(TokenKind.OPERATOR, "=")
        value = self.parse_expr()
        self.expect_keyword("IN")
        body = self.parse_expr()
        return S.LetExpr(var.lexeme, ty, value, body, span(let_tok.range, body.range), var.range)

    def _parse_field_init(self) -> S.FieldInit:
        name = self.expect(TokenKind.IDENTIFIER, what="field name")
        self.expect(TokenKind.OPERATOR, ":=")
        value = self.parse_expr()
        return S.FieldInit(name.lexeme, value, span(name.range, value.range))


def _end_position(text: str) -> SourcePos:
    lines = text.split("\n")
    last = lines[-1]
    return SourcePos(len(lines) - 1, sum(2 if ord(c) > 0xFFFF else 1 for c in last))


def parse_theory_file(uri: str, text: str, connective_decls: bool = False) -> ParseResult:
    """Parse a whole muPVS file. Total: never raises on any input."""
    tokens, lex_diags = lex(text)
    parser = _Parser(tokens, _end_position(text), connective_decls=connective_decls)
    ast = parser.parse_file()
    return ParseResult(ast, lex_diags + parser.diagnostics, tokens)


def parse_expression(text: str) -> tuple[S.Expr | None, list[Diagnostic]]:
    """Parse a standalone expression (evaluator input, inst terms)."""
    tokens, lex_diags = lex(text)
    parser = _Parser(tokens, _end_position(text))
    if parser.peek() is None:
        err = parser.fail("expected an expression")
        parser.diag(err)
        return None, lex_diags + parser.diagnostics
    try:
        expr = parser.parse_expr()
        if parser.peek() is not None:
            raise parser.fail("unexpected trailing input")
        return expr, lex_diags + parser.diagnostics
    except _ParseError as err:
        parser.diag(err)
        return None, lex_diags + parser.diagnostics

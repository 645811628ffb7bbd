"""Lexer for muPVS source text.

Tokenization is total: unknown characters become one-character tokens with
an attached diagnostic instead of failing. Comments ("%" to end of line)
are emitted as tokens of kind COMMENT and filtered out by the parser, so
the token stream plus inter-token whitespace reconstructs the source.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .positions import Diagnostic, Range, Severity, SourcePos, utf16_width

KEYWORDS = frozenset(
    {
        "THEORY", "BEGIN", "END", "IMPORTING", "TYPE",
        "THEOREM", "LEMMA", "CONJECTURE", "RECURSIVE",
        "IF", "THEN", "ELSE", "ENDIF", "FORALL", "EXISTS", "LET", "IN",
        "AND", "OR", "NOT", "IMPLIES", "IFF", "TRUE", "FALSE",
        "bool", "int", "nat", "real", "string",
    }
)

_OPERATORS = frozenset({"->", ":=", "/=", "<=", ">=", "+", "-", "*", "/", "=", "<", ">", "|"})
_PUNCTUATION = frozenset({"[#", "#]", "(#", "#)", "(", ")", "[", "]", "{", "}", ",", ":"})
# Longest match first across both families (":=" must beat ":").
_SYMBOLS = sorted(_OPERATORS | _PUNCTUATION, key=len, reverse=True)


class TokenKind(enum.Enum):
    KEYWORD = "keyword"
    IDENTIFIER = "identifier"
    NUMBER = "number"
    STRING = "string"
    OPERATOR = "operator"
    BACKTICK = "backtick"
    PUNCTUATION = "punctuation"
    COMMENT = "comment"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    range: Range


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() and ch.isascii()


def _is_ident_char(ch: str) -> bool:
    return (ch.isalnum() or ch == "_") and ch.isascii()


def lex(text: str) -> tuple[list[Token], list[Diagnostic]]:
    """Tokenize ``text``, returning tokens and lexical diagnostics."""
    tokens: list[Token] = []
    diagnostics: list[Diagnostic] = []
    for line_no, line in enumerate(text.split("\n")):
        _lex_line(line, line_no, tokens, diagnostics)
    return tokens, diagnostics


def tokenize(text: str) -> list[Token]:
    return lex(text)[0]


def _lex_line(line: str, line_no: int, tokens: list[Token], diagnostics: list[Diagnostic]) -> None:
    i = 0  # code-point index into line
    col = 0  # UTF-16 column
    n = len(line)

    def emit(kind: TokenKind, start_col: int, lexeme: str) -> None:
        rng = Range(SourcePos(line_no, start_col), SourcePos(line_no, col))
        tokens.append(Token(kind, lexeme, rng))

    while i < n:
        ch = line[i]
        if ch.isspace():
            col += utf16_width(ch)
            i += 1
            continue
        start_col = col
        if ch == "%":
            lexeme = line[i:]
            col += sum(utf16_width(c) for c in lexeme)
            i = n
            emit(TokenKind.COMMENT, start_col, lexeme)
            continue
        if ch == "`":
            i += 1
            col += 1
            emit(TokenKind.BACKTICK, start_col, "`")
            continue
        if _is_ident_start(ch):
            j = i + 1
            while j < n and _is_ident_char(line[j]):
                j += 1
            # Skolem-constant suffix: name!123
            if j < n and line[j] == "!" and j + 1 < n and line[j + 1].isdigit():
                j += 1
                while j < n and line[j].isdigit():
                    j += 1
            lexeme = line[i:j]
            col += j - i
            i = j
            kind = TokenKind.KEYWORD if lexeme in KEYWORDS else TokenKind.IDENTIFIER
            emit(kind, start_col, lexeme)
            continue
        if ch.isdigit():
            j = i + 1
            while j < n and line[j].isdigit():
                j += 1
            if j + 1 < n and line[j] == "." and line[j + 1].isdigit():
                j += 1
                while j < n and line[j].isdigit():
                    j += 1
            lexeme = line[i:j]
            col += j - i
            i = j
            emit(TokenKind.NUMBER, start_col, lexeme)
            continue
        if ch == '"':
            j = i + 1
            while j < n and line[j] != '"':
                j += 1
            if j < n:
                j += 1
                lexeme = line[i:j]
            else:
                lexeme = line[i:]
                j = n
            col += sum(utf16_width(c) for c in lexeme)
            terminated = lexeme.endswith('"') and len(lexeme) >= 2
            i = j
            emit(TokenKind.STRING, start_col, lexeme)
            if not terminated:
                diagnostics.append(
                    Diagnostic(tokens[-1].range, Severity.ERROR, "unterminated string literal", "parser")
                )
            continue
        matched = False
        for sym in _SYMBOLS:
            if line.startswith(sym, i):
                i += len(sym)
                col += len(sym)
                kind = TokenKind.OPERATOR if sym in _OPERATORS else TokenKind.PUNCTUATION
                emit(kind, start_col, sym)
                matched = True
                break
        if matched:
            continue
        # Unknown character: one-character error token.
        i += 1
        col += utf16_width(ch)
        emit(TokenKind.PUNCTUATION, start_col, ch)
        diagnostics.append(
            Diagnostic(tokens[-1].range, Severity.ERROR, f"unexpected character {ch!r}", "parser")
        )

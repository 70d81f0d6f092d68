"""Tokenizer for the query language.

Keeps tokens deliberately small: identifiers, numbers, strings, and single
punctuation characters. Multi-character operators (->, <-, <=, @@) are
assembled by the parser, which knows the grammatical context; `--` starts a
line comment.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import GvqlSyntaxError

PUNCT = set("()[]{}<>=!,;:.+-*/@$")


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT | NUMBER | STRING | PUNCT | EOF
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    line, col = 1, 1
    n = len(text)

    def bump(length: int):
        nonlocal i, line, col
        for _ in range(length):
            if text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = text[i]
        if c in " \t\r\n":
            bump(1)
            continue
        if c == "-" and i + 1 < n and text[i + 1] == "-":
            while i < n and text[i] != "\n":
                bump(1)
            continue
        start_line, start_col = line, col
        if c == '"':
            j = i + 1
            out = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    out.append(text[j + 1])
                    j += 2
                else:
                    out.append(text[j])
                    j += 1
            if j >= n:
                raise GvqlSyntaxError("unterminated string literal", start_line, start_col)
            tokens.append(Token("STRING", "".join(out), start_line, start_col))
            bump(j + 1 - i)
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_dot = seen_exp = False
            while j < n:
                ch = text[j]
                if ch.isdigit():
                    j += 1
                elif ch == "." and not seen_dot and not seen_exp:
                    seen_dot = True
                    j += 1
                elif ch in "eE" and not seen_exp and j > i:
                    seen_exp = True
                    j += 1
                    if j < n and text[j] in "+-":
                        j += 1
                else:
                    break
            tokens.append(Token("NUMBER", text[i:j], start_line, start_col))
            bump(j - i)
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", text[i:j], start_line, start_col))
            bump(j - i)
            continue
        if c in PUNCT:
            tokens.append(Token("PUNCT", c, start_line, start_col))
            bump(1)
            continue
        raise GvqlSyntaxError(f"unexpected character {c!r}", line, col)
    tokens.append(Token("EOF", "", line, col))
    return tokens

"""Tokenizer for the query language."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import QuerySyntaxError

WORD = "word"
QUOTED = "quoted"  # `backquoted identifier`
STRING = "string"
INT = "int"
FLOAT = "float"
OP = "op"
EOF = "eof"

# longest first so that e.g. "->" wins over "-"
_OPS = ["$-", "$^", "$$", "->", "==", "!=", "<>", "<=", ">=", "<", ">", "=", "+", "-", "*", "/", "%",
        "(", ")", "[", "]", "{", "}", ",", ".", ":", ";", "|", "@", "$"]

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", '"': '"', "'": "'", "0": "\0"}


@dataclass(frozen=True)
class Token:
    kind: str
    value: object
    line: int
    col: int
    end: int  # offset just past the token

    @property
    def upper(self) -> str:
        return self.value.upper() if self.kind == WORD else ""

    def __repr__(self):
        return f"{self.kind}:{self.value!r}@{self.line}:{self.col}"


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i = 0
    line, line_start = 1, 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
            line_start = i
            continue
        if c.isspace():
            i += 1
            continue
        if text.startswith("--", i) or text.startswith("//", i) or c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        col = i - line_start + 1
        if c == '"' or c == "'":
            quote = c
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise QuerySyntaxError("unterminated string literal", line, col, ["string"])
                ch = text[j]
                if ch == "\\" and j + 1 < n:
                    buf.append(_ESCAPES.get(text[j + 1], text[j + 1]))
                    j += 2
                    continue
                if ch == quote:
                    break
                if ch == "\n":
                    raise QuerySyntaxError("newline in string literal", line, col, ["string"])
                buf.append(ch)
                j += 1
            toks.append(Token(STRING, "".join(buf), line, col, j + 1))
            i = j + 1
            continue
        if c == "`":
            j = text.find("`", i + 1)
            if j < 0:
                raise QuerySyntaxError("unterminated quoted identifier", line, col, ["`"])
            toks.append(Token(QUOTED, text[i + 1 : j], line, col, j + 1))
            i = j + 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            is_float = False
            if text.startswith(("0x", "0X"), i):
                j = i + 2
                while j < n and text[j] in "0123456789abcdefABCDEF":
                    j += 1
                toks.append(Token(INT, int(text[i:j], 16), line, col, j))
                i = j
                continue
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            raw = text[i:j]
            toks.append(Token(FLOAT if is_float else INT, float(raw) if is_float else int(raw), line, col, j))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(Token(WORD, text[i:j], line, col, j))
            i = j
            continue
        for op in _OPS:
            if text.startswith(op, i):
                toks.append(Token(OP, op, line, col, i + len(op)))
                i += len(op)
                break
        else:
            raise QuerySyntaxError(f"unexpected character {c!r}", line, col, [])
    toks.append(Token(EOF, None, line, i - line_start + 1, n))
    return toks

"""Recursive-descent parser for a restricted literal grammar.

Accepts exactly: single- or double-quoted strings with backslash escapes
(\\\\ \\" \\' \\n \\t \\r), optionally signed integers, lists with optional
trailing comma, and maps with string keys. Whitespace and ``#`` line comments
are skipped anywhere between tokens. No floats, no booleans, no expressions,
and nothing is ever evaluated.

Values round-trip: ``parse_literal(serialize_literal(v)) == v``.
"""

from __future__ import annotations

from ..errors import DuplicateKey, LiteralSyntaxError

LiteralValue = str | int | list | dict

_ESCAPES = {"\\": "\\", '"': '"', "'": "'", "n": "\n", "t": "\t", "r": "\r"}
_SERIALIZE_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r"}
_DIGITS = frozenset("0123456789")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.end = len(text)

    def fail(self, expected: str) -> LiteralSyntaxError:
        return LiteralSyntaxError(self.pos, expected)

    def skip_ws(self) -> None:
        text = self.text
        while self.pos < self.end:
            ch = text[self.pos]
            if ch in " \t\r\n\f\v":
                self.pos += 1
            elif ch == "#":
                while self.pos < self.end and text[self.pos] != "\n":
                    self.pos += 1
            else:
                return

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < self.end else ""

    def parse_value(self) -> LiteralValue:
        self.skip_ws()
        ch = self.peek()
        if ch in "\"'":
            return self.parse_string()
        if ch in _DIGITS or ch in "+-":
            return self.parse_int()
        if ch == "[":
            return self.parse_list()
        if ch == "{":
            return self.parse_map()
        raise self.fail("a string, integer, list, or map")

    def parse_string(self) -> str:
        quote = self.peek()
        self.pos += 1
        parts: list[str] = []
        text = self.text
        while True:
            if self.pos >= self.end:
                raise self.fail(f"closing {quote}")
            ch = text[self.pos]
            if ch == quote:
                self.pos += 1
                return "".join(parts)
            if ch == "\\":
                self.pos += 1
                if self.pos >= self.end:
                    raise self.fail("an escape character")
                esc = text[self.pos]
                if esc not in _ESCAPES:
                    raise self.fail("a valid escape (\\\\ \\\" \\' \\n \\t \\r)")
                parts.append(_ESCAPES[esc])
                self.pos += 1
            else:
                parts.append(ch)
                self.pos += 1

    def parse_int(self) -> int:
        start = self.pos
        if self.peek() in "+-":
            self.pos += 1
        digits_start = self.pos
        while self.pos < self.end and self.text[self.pos] in _DIGITS:
            self.pos += 1
        if self.pos == digits_start:
            raise self.fail("a digit")
        return int(self.text[start : self.pos])

    def parse_list(self) -> list:
        self.pos += 1  # consume '['
        items: list = []
        while True:
            self.skip_ws()
            if self.peek() == "]":
                self.pos += 1
                return items
            if items:
                self._expect_comma("']'")
                self.skip_ws()
                if self.peek() == "]":  # trailing comma
                    self.pos += 1
                    return items
            items.append(self.parse_value())

    def parse_map(self) -> dict:
        self.pos += 1  # consume '{'
        result: dict = {}
        while True:
            self.skip_ws()
            if self.peek() == "}":
                self.pos += 1
                return result
            if result:
                self._expect_comma("'}'")
                self.skip_ws()
                if self.peek() == "}":  # trailing comma
                    self.pos += 1
                    return result
            if self.peek() not in "\"'":
                raise self.fail("a string key")
            key = self.parse_string()
            if key in result:
                raise DuplicateKey(key)
            self.skip_ws()
            if self.peek() != ":":
                raise self.fail("':'")
            self.pos += 1
            result[key] = self.parse_value()

    def _expect_comma(self, closer: str) -> None:
        if self.peek() != ",":
            raise self.fail(f"',' or {closer}")
        self.pos += 1


def parse_literal(body: str) -> LiteralValue:
    """Parse one literal value; trailing non-whitespace is an error."""
    parser = _Parser(body)
    value = parser.parse_value()
    parser.skip_ws()
    if parser.pos != parser.end:
        raise parser.fail("end of input")
    return value


def _serialize_string(value: str) -> str:
    out = ['"']
    for ch in value:
        out.append(_SERIALIZE_ESCAPES.get(ch, ch))
    out.append('"')
    return "".join(out)


def serialize_literal(value: LiteralValue) -> str:
    """Canonical single-line rendering that parse_literal inverts exactly."""
    if isinstance(value, bool):
        raise TypeError("booleans are outside the literal grammar")
    if isinstance(value, str):
        return _serialize_string(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(serialize_literal(v) for v in value) + "]"
    if isinstance(value, dict):
        pairs = []
        for key, v in value.items():
            if not isinstance(key, str):
                raise TypeError(f"map keys must be strings, got {type(key).__name__}")
            pairs.append(f"{_serialize_string(key)}: {serialize_literal(v)}")
        return "{" + ", ".join(pairs) + "}"
    raise TypeError(f"cannot serialize {type(value).__name__}")

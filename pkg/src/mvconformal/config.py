"""Reader for the structured text files used by manifests and experiment configs.

The accepted grammar is a strict TOML subset: ``key = value`` pairs, ``[section]``
headers, ``#`` comments, and values that are strings, integers, floats, booleans,
arrays (possibly multi-line), or inline tables ``{k = v, ...}``.
"""

from __future__ import annotations

from .errors import ConfigError

_BARE_KEY = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-")


class _Stream:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def peek(self):
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def next(self):
        ch = self.peek()
        self.pos += 1
        return ch

    def line(self):
        return self.text.count("\n", 0, self.pos) + 1

    def skip_ws(self, newlines=False):
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "#":
                while self.pos < len(self.text) and self.text[self.pos] != "\n":
                    self.pos += 1
            elif ch in " \t" or (newlines and ch in "\r\n"):
                self.pos += 1
            else:
                break


def _parse_string(s: _Stream) -> str:
    quote = s.next()
    out = []
    while True:
        ch = s.next()
        if ch == "":
            raise ConfigError(f"line {s.line()}: unterminated string")
        if ch == quote:
            return "".join(out)
        if ch == "\\" and quote == '"':
            esc = s.next()
            mapping = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}
            if esc not in mapping:
                raise ConfigError(f"line {s.line()}: unsupported escape \\{esc}")
            out.append(mapping[esc])
        else:
            out.append(ch)


def _parse_scalar(token: str, line: int):
    if token in ("true", "false"):
        return token == "true"
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        raise ConfigError(f"line {line}: cannot parse value {token!r}") from None


def _parse_value(s: _Stream):
    s.skip_ws()
    ch = s.peek()
    if ch in "\"'":
        return _parse_string(s)
    if ch == "[":
        s.next()
        items = []
        while True:
            s.skip_ws(newlines=True)
            if s.peek() == "]":
                s.next()
                return items
            items.append(_parse_value(s))
            s.skip_ws(newlines=True)
            if s.peek() == ",":
                s.next()
            elif s.peek() != "]":
                raise ConfigError(f"line {s.line()}: expected ',' or ']' in array")
    if ch == "{":
        s.next()
        table = {}
        while True:
            s.skip_ws()
            if s.peek() == "}":
                s.next()
                return table
            key = _parse_key(s)
            s.skip_ws()
            if s.next() != "=":
                raise ConfigError(f"line {s.line()}: expected '=' in inline table")
            table[key] = _parse_value(s)
            s.skip_ws()
            if s.peek() == ",":
                s.next()
            elif s.peek() != "}":
                raise ConfigError(f"line {s.line()}: expected ',' or '}}' in inline table")
    # bare scalar: read until a delimiter
    start = s.pos
    while s.pos < len(s.text) and s.text[s.pos] not in ",]}#\r\n \t":
        s.pos += 1
    token = s.text[start:s.pos]
    if not token:
        raise ConfigError(f"line {s.line()}: missing value")
    return _parse_scalar(token, s.line())


def _parse_key(s: _Stream) -> str:
    if s.peek() in "\"'":
        return _parse_string(s)
    start = s.pos
    while s.pos < len(s.text) and s.text[s.pos] in _BARE_KEY:
        s.pos += 1
    if s.pos == start:
        raise ConfigError(f"line {s.line()}: expected a key")
    return s.text[start:s.pos]


def parse_structured(text: str) -> dict:
    """Parse structured text into nested dicts; sections become sub-dicts."""
    root: dict = {}
    current = root
    s = _Stream(text)
    while True:
        s.skip_ws(newlines=True)
        if s.pos >= len(s.text):
            return root
        if s.peek() == "[":
            s.next()
            name = _parse_key(s)
            if s.next() != "]":
                raise ConfigError(f"line {s.line()}: expected ']' after section name")
            if name in root and not isinstance(root[name], dict):
                raise ConfigError(f"line {s.line()}: section {name!r} clashes with a key")
            current = root.setdefault(name, {})
            continue
        key = _parse_key(s)
        s.skip_ws()
        if s.next() != "=":
            raise ConfigError(f"line {s.line()}: expected '=' after key {key!r}")
        if key in current:
            raise ConfigError(f"line {s.line()}: duplicate key {key!r}")
        current[key] = _parse_value(s)
        s.skip_ws()
        if s.peek() not in ("", "\r", "\n"):
            raise ConfigError(f"line {s.line()}: trailing content after value for {key!r}")


def load_structured(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_structured(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc

"""Parser for the structured key/value tree format used by model, pair and
config files.

Grammar, one item per line::

    # comment
    key: value tokens
    blockname {
        ...nested items...
    }

Values keep their raw token text; accessors convert on demand. Brackets and
commas inside values are treated as whitespace, so ``w: [1, 1, 1]`` and
``w: 1 1 1`` parse identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class BlockParseError(ValueError):
    pass


_REQUIRED = object()


@dataclass
class Node:
    name: str
    line: int = 0
    entries: list = field(default_factory=list)  # list[(key, raw_value, line)]
    children: list = field(default_factory=list)

    # -- entry accessors ---------------------------------------------------
    def has(self, key: str) -> bool:
        return any(k == key for k, _, _ in self.entries)

    def raw(self, key: str, default=_REQUIRED) -> str:
        for k, v, _ in self.entries:
            if k == key:
                return v
        if default is _REQUIRED:
            raise BlockParseError(f"{self.name!r} block (line {self.line}): missing key {key!r}")
        return default

    def str_(self, key: str, default=_REQUIRED) -> str:
        v = self.raw(key, default)
        return v.strip() if isinstance(v, str) else v

    def float_(self, key: str, default=_REQUIRED) -> float:
        v = self.raw(key, default)
        if not isinstance(v, str):
            return v
        try:
            return float(_clean(v).split()[0])
        except (ValueError, IndexError) as exc:
            raise BlockParseError(f"key {key!r} (block {self.name!r}): not a number: {v!r}") from exc

    def int_(self, key: str, default=_REQUIRED) -> int:
        v = self.raw(key, default)
        if not isinstance(v, str):
            return v
        try:
            return int(_clean(v).split()[0])
        except (ValueError, IndexError) as exc:
            raise BlockParseError(f"key {key!r} (block {self.name!r}): not an integer: {v!r}") from exc

    def floats(self, key: str, default=_REQUIRED) -> list:
        v = self.raw(key, default)
        if not isinstance(v, str):
            return v
        try:
            return [float(tok) for tok in _clean(v).split()]
        except ValueError as exc:
            raise BlockParseError(f"key {key!r} (block {self.name!r}): not numbers: {v!r}") from exc

    def strs(self, key: str, default=_REQUIRED) -> list:
        v = self.raw(key, default)
        if not isinstance(v, str):
            return v
        return _clean(v).split()

    # -- child accessors ---------------------------------------------------
    def blocks(self, name: str) -> list:
        return [c for c in self.children if c.name == name]

    def child(self, name: str, default=_REQUIRED):
        for c in self.children:
            if c.name == name:
                return c
        if default is _REQUIRED:
            raise BlockParseError(f"{self.name!r} block (line {self.line}): missing {name!r} block")
        return default


def _clean(value: str) -> str:
    for ch in "[],":
        value = value.replace(ch, " ")
    return value


def parse_blockfile(text: str, source: str = "<string>") -> Node:
    """Blocks may be written inline (``joint { type: fixed }``) or spread over
    lines; entry values run to the end of the line or the next key/brace."""
    root = Node(name="<root>", line=0)
    stack = [root]
    key = None          # entry being collected
    value_tokens = []
    key_line = 0
    pending_name = None  # bare token waiting for '{'

    def flush_entry():
        nonlocal key, value_tokens
        if key is not None:
            stack[-1].entries.append((key, " ".join(value_tokens), key_line))
            key = None
            value_tokens = []

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0]
        tokens = line.replace("{", " { ").replace("}", " } ").split()
        for tok in tokens:
            if tok == "{":
                if pending_name is None and key is not None and value_tokens:
                    pending_name = value_tokens.pop()
                    flush_entry()
                if pending_name is None:
                    raise BlockParseError(f"{source}:{lineno}: block opened without a name")
                flush_entry()
                node = Node(name=pending_name, line=lineno)
                stack[-1].children.append(node)
                stack.append(node)
                pending_name = None
            elif tok == "}":
                flush_entry()
                if pending_name is not None:
                    raise BlockParseError(f"{source}:{lineno}: dangling token {pending_name!r}")
                if len(stack) == 1:
                    raise BlockParseError(f"{source}:{lineno}: unmatched '}}'")
                stack.pop()
            elif tok.endswith(":") and len(tok) > 1:
                if pending_name is not None:
                    raise BlockParseError(f"{source}:{lineno}: dangling token {pending_name!r}")
                flush_entry()
                key = tok[:-1]
                key_line = lineno
            else:
                if key is not None:
                    value_tokens.append(tok)
                elif pending_name is None:
                    pending_name = tok
                else:
                    raise BlockParseError(
                        f"{source}:{lineno}: cannot parse token {tok!r} "
                        f"(after {pending_name!r})"
                    )
        flush_entry()  # values never span lines
    if pending_name is not None:
        raise BlockParseError(f"{source}: dangling token {pending_name!r}")
    if len(stack) != 1:
        raise BlockParseError(
            f"{source}: unclosed block {stack[-1].name!r} opened at line {stack[-1].line}"
        )
    return root


def parse_blockfile_path(path) -> Node:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_blockfile(fh.read(), source=str(path))

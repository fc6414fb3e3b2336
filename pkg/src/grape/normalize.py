"""Naming normalization: map user-defined names to fun<k>/var<k>/str<k>.

A single NameMap is shared across the buggy and fixed versions of a patch so
that identical identifiers normalize identically in both graphs.
"""

from dataclasses import dataclass, field

from .minilang import BUILTINS, MiniSyntaxError, lex, parse_mini


class NormalizationError(Exception):
    pass


@dataclass
class NameMap:
    functions: dict[str, str] = field(default_factory=dict)
    variables: dict[str, str] = field(default_factory=dict)
    strings: dict[str, str] = field(default_factory=dict)

    def copy(self) -> "NameMap":
        return NameMap(dict(self.functions), dict(self.variables), dict(self.strings))

    def inverse(self) -> "NameMap":
        return NameMap({v: k for k, v in self.functions.items()},
                       {v: k for k, v in self.variables.items()},
                       {v: k for k, v in self.strings.items()})


def _assign(mapping: dict[str, str], original: str, prefix: str) -> str:
    if original in mapping:
        return mapping[original]
    if original in mapping.values():
        return original  # already a normalized name from this very map
    name = f"{prefix}{len(mapping) + 1}"
    mapping[original] = name
    return name


def normalize_names(source: str, name_map: NameMap | None = None) -> tuple[str, NameMap]:
    """Rewrite user-defined function names, variable names, and string
    literals to fun<k>/var<k>/str<k> in first-occurrence order.

    Keywords, built-ins, numeric literals, and operators are preserved.
    Returns the rewritten source and the (possibly extended) NameMap.
    """
    try:
        parse_mini(source)  # surface parse diagnostics before renaming
        tokens = lex(source)
    except MiniSyntaxError as exc:
        raise NormalizationError(f"source does not parse: {exc}") from exc
    name_map = name_map.copy() if name_map is not None else NameMap()
    pieces = []
    cursor = 0
    for idx, tok in enumerate(tokens):
        replacement = None
        if tok.kind == "IDENT" and tok.text not in BUILTINS:
            nxt = tokens[idx + 1] if idx + 1 < len(tokens) else None
            if nxt is not None and nxt.text == "(":
                replacement = _assign(name_map.functions, tok.text, "fun")
            else:
                replacement = _assign(name_map.variables, tok.text, "var")
        elif tok.kind == "STRING":
            replacement = _assign(name_map.strings, tok.text, "str")
        if replacement is not None and replacement != tok.text:
            pieces.append(source[cursor:tok.pos])
            pieces.append(replacement)
            cursor = tok.pos + len(tok.text)
    pieces.append(source[cursor:])
    return "".join(pieces), name_map


def denormalize(source: str, name_map: NameMap) -> str:
    """Apply the inverse NameMap, recovering the original token stream."""
    inv = name_map.inverse()
    tokens = lex(source)
    pieces = []
    cursor = 0
    for idx, tok in enumerate(tokens):
        original = None
        if tok.kind == "IDENT":
            nxt = tokens[idx + 1] if idx + 1 < len(tokens) else None
            if nxt is not None and nxt.text == "(":
                original = inv.functions.get(tok.text)
            else:
                # normalized string literals lex as identifiers (str<k>)
                original = inv.variables.get(tok.text) or inv.strings.get(tok.text)
        if original is not None and original != tok.text:
            pieces.append(source[cursor:tok.pos])
            pieces.append(original)
            cursor = tok.pos + len(tok.text)
    pieces.append(source[cursor:])
    return "".join(pieces)

"""Expression terms shared by the query AST and the algebra trees."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Union

from grapevine.values import COMPARISON_OPS

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class Attr:
    """Reference to an attribute (or, in a query, a variable) by name."""

    name: str

    def __str__(self) -> str:
        return quote_name(self.name)


@dataclass(frozen=True)
class Prop:
    """``var.key``: a property of the vertex or edge bound to ``var``."""

    var: str
    key: str

    def __str__(self) -> str:
        return f"{quote_name(self.var)}.{quote_name(self.key)}"


@dataclass(frozen=True, eq=False)
class Literal:
    value: Any

    # plain dataclass equality would conflate 1, 1.0 and True
    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Literal)
            and type(self.value) is type(other.value)
            and self.value == other.value
        )

    def __hash__(self) -> int:
        return hash((type(self.value), self.value))

    def __str__(self) -> str:
        return format_literal(self.value)


Operand = Union[Attr, Prop, Literal]


@dataclass(frozen=True)
class Comparison:
    left: Operand
    op: str
    right: Operand

    def __post_init__(self) -> None:
        if self.op not in COMPARISON_OPS:
            raise ValueError(f"unknown comparison operator {self.op!r}")

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"

    def operands(self) -> tuple[Operand, Operand]:
        return (self.left, self.right)


def is_identifier(name: str) -> bool:
    return bool(_IDENT.match(name))


def quote_name(name: str) -> str:
    if is_identifier(name):
        return name
    return "`" + name.replace("`", "``") + "`"


def format_literal(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        text = repr(value)
        if not any(c in text for c in ".eE"):
            text += ".0"
        return text
    if isinstance(value, str):
        escaped = (
            value.replace("\\", "\\\\")
            .replace("'", "\\'")
            .replace("\n", "\\n")
            .replace("\r", "\\r")
            .replace("\t", "\\t")
        )
        return f"'{escaped}'"
    raise TypeError(f"cannot format literal {value!r}")


"""Property values and the comparison semantics shared by every evaluator.

A value is one of:

* an atomic domain element (``int``, ``float``, ``str`` or ``bool``),
* a :class:`Bag`, an unordered multiset of values,
* a :class:`Path`, an immutable alternating vertex/edge id sequence,
* :data:`MISSING`, which stands in for an absent property at operator
  boundaries.

Predicates are evaluated exclusively through :func:`compare` so that the
incremental engine and the reference evaluator cannot drift apart.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Any, Iterable, Iterator

COMPARISON_OPS = ("=", "<>", "<", "<=", ">", ">=")


class _Missing:
    __slots__ = ()
    _instance: _Missing | None = None

    def __new__(cls) -> _Missing:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "MISSING"

    def __reduce__(self):
        return (_Missing, ())


MISSING = _Missing()


@dataclass(frozen=True)
class Path:
    """Alternating ``(v0, e1, v1, ..., vk)`` id sequence, replaced only as a whole."""

    ids: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.ids) % 2 != 1:
            raise ValueError(f"path must have odd length, got {len(self.ids)}")

    @property
    def vertices(self) -> tuple[int, ...]:
        return self.ids[0::2]

    @property
    def edges(self) -> tuple[int, ...]:
        return self.ids[1::2]

    @property
    def hops(self) -> int:
        return len(self.ids) // 2

    @property
    def start(self) -> int:
        return self.ids[0]

    @property
    def end(self) -> int:
        return self.ids[-1]

    def __repr__(self) -> str:
        return f"Path({list(self.ids)})"


class Bag:
    """Immutable multiset; equality ignores order."""

    __slots__ = ("_counts", "_hash")

    def __init__(self, items: Iterable[Any] = ()) -> None:
        counts = Counter(items)
        for item in counts:
            check_value(item, allow_path=False)
        self._counts = counts
        self._hash = hash(frozenset(counts.items()))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Bag) and self._counts == other._counts

    def __hash__(self) -> int:
        return self._hash

    def __iter__(self) -> Iterator[Any]:
        return self._counts.elements()

    def __len__(self) -> int:
        return sum(self._counts.values())

    def count(self, item: Any) -> int:
        return self._counts.get(item, 0)

    def __repr__(self) -> str:
        return f"Bag({sorted(self, key=value_sort_key)!r})"


def check_value(value: Any, *, allow_path: bool = True) -> None:
    """Raise ``ValueError`` unless ``value`` belongs to the value model."""
    if isinstance(value, (bool, int, str)):
        return
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite float {value!r} is not a property value")
        return
    if isinstance(value, Bag):
        return
    if isinstance(value, Path):
        if allow_path:
            return
        raise ValueError("paths cannot be stored inside bags or properties")
    raise ValueError(f"unsupported value {value!r} of type {type(value).__name__}")


def _family(value: Any) -> str | None:
    # bool must be tested before int
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, (int, float)):
        return "num"
    if isinstance(value, str):
        return "str"
    if isinstance(value, Bag):
        return "bag"
    if isinstance(value, Path):
        return "path"
    return None


def _equal(a: Any, b: Any) -> bool:
    fa, fb = _family(a), _family(b)
    if fa is None or fa != fb:
        return False
    if fa == "bag":
        return a == b and _bag_types_match(a, b)
    return a == b


def _bag_types_match(a: Bag, b: Bag) -> bool:
    # Counter treats 1, 1.0 and True as one key; keep True apart from 1.
    def tagged(bag: Bag) -> Counter:
        return Counter((_family(x), x) for x in bag)

    return tagged(a) == tagged(b)


def compare(op: str, left: Any, right: Any) -> bool:
    """Two-valued comparison.

    Anything involving :data:`MISSING` is false. ``=`` requires the same
    type family (int and float form one numeric family, bool is separate);
    ``<>`` is its negation. Ordering operators are defined only between
    atomic values of one family and are false otherwise.
    """
    if left is MISSING or right is MISSING:
        return False
    if op == "=":
        return _equal(left, right)
    if op == "<>":
        return not _equal(left, right)
    fam = _family(left)
    if fam not in ("num", "str", "bool") or fam != _family(right):
        return False
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    if op == ">=":
        return left >= right
    raise ValueError(f"unknown comparison operator {op!r}")


def value_from_json(raw: Any) -> Any:
    """Decode a property value: JSON scalar -> atomic, JSON array -> bag."""
    if isinstance(raw, list):
        return Bag(value_from_json(item) for item in raw)
    if raw is None or isinstance(raw, dict):
        raise ValueError(f"property value must be a scalar or an array, got {raw!r}")
    check_value(raw, allow_path=False)
    return raw


def value_to_json(value: Any) -> Any:
    if value is MISSING:
        return None
    if isinstance(value, Path):
        return list(value.ids)
    if isinstance(value, Bag):
        items = [value_to_json(x) for x in value]
        return sorted(items, key=lambda x: json.dumps(x, sort_keys=True))
    return value


def value_sort_key(value: Any) -> str:
    return json.dumps(value_to_json(value), sort_keys=True)

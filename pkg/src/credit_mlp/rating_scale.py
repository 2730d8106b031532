"""Ordered credit-grade alphabet and class-index encoding.

Grades are ordered best first. A larger index always means worse credit, both
for the global scale position and for the compact class index used as the
model target.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from credit_mlp.errors import ConfigError, DataError

# S&P long-term symbols without the standalone "C" grade (21 entries).
DEFAULT_GRADES: tuple[str, ...] = (
    "AAA", "AA+", "AA", "AA-",
    "A+", "A", "A-",
    "BBB+", "BBB", "BBB-",
    "BB+", "BB", "BB-",
    "B+", "B", "B-",
    "CCC+", "CCC", "CCC-",
    "CC", "D",
)

OBSERVED_GRADES: tuple[str, ...] = ("A+", "A-", "BB+", "B-", "CCC+", "D")


class UnknownGradeError(DataError):
    def __init__(self, token: str):
        super().__init__(f"unknown grade {token!r}")
        self.token = token


@dataclass(frozen=True)
class RatingScale:
    grades: tuple[str, ...] = DEFAULT_GRADES

    def __post_init__(self):
        grades = tuple(self.grades)
        object.__setattr__(self, "grades", grades)
        if not grades:
            raise ConfigError("rating scale must contain at least one grade")
        if any(not isinstance(g, str) or not g.strip() for g in grades):
            raise ConfigError("rating scale symbols must be non-empty strings")
        if len(set(grades)) != len(grades):
            raise ConfigError("rating scale symbols must be unique")
        object.__setattr__(self, "_index", {g: i for i, g in enumerate(grades)})

    def __len__(self) -> int:
        return len(self.grades)

    def __contains__(self, symbol: object) -> bool:
        return symbol in self._index

    def index(self, symbol: str) -> int:
        return parse_grade(symbol, self)

    def grade(self, index: int) -> str:
        """Inverse of :meth:`index`."""
        if not 0 <= index < len(self.grades):
            raise IndexError(f"grade index {index} outside 0..{len(self.grades) - 1}")
        return self.grades[index]

    @classmethod
    def from_config(cls, grades: Iterable[str] | None) -> "RatingScale":
        if grades is None:
            return cls()
        return cls(tuple(str(g) for g in grades))


def parse_grade(text: str, scale: RatingScale | None = None) -> int:
    """Return the global position of ``text`` on ``scale`` (0 = best)."""
    scale = scale if scale is not None else RatingScale()
    token = text.strip() if isinstance(text, str) else text
    try:
        return scale._index[token]
    except (KeyError, TypeError):
        raise UnknownGradeError(str(text)) from None


@dataclass(frozen=True)
class ClassIndexMap:
    """Observed grades mapped to consecutive target integers 0..C-1."""

    grades: tuple[str, ...]
    scale: RatingScale = RatingScale()

    def __post_init__(self):
        grades = tuple(self.grades)
        object.__setattr__(self, "grades", grades)
        if not grades:
            raise DataError("class map needs at least one grade")
        positions = [parse_grade(g, self.scale) for g in grades]
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise DataError("class map grades must be unique and in scale order")

    @property
    def entries(self) -> dict[str, int]:
        return {g: i for i, g in enumerate(self.grades)}

    @property
    def n_classes(self) -> int:
        return len(self.grades)

    def __len__(self) -> int:
        return len(self.grades)

    def __contains__(self, grade: object) -> bool:
        return grade in self.grades

    def class_index(self, grade: str) -> int:
        try:
            return self.grades.index(grade.strip())
        except ValueError:
            raise DataError(f"grade {grade!r} is not one of the observed classes {list(self.grades)}") from None

    def index_to_grade(self, index: int) -> str:
        return self.grades[index]

    def encode(self, grades: Iterable[str]) -> list[int]:
        lookup = self.entries
        out = []
        for g in grades:
            if g not in lookup:
                raise DataError(f"grade {g!r} is not one of the observed classes {list(self.grades)}")
            out.append(lookup[g])
        return out

    def to_dict(self) -> Mapping[str, int]:
        return self.entries


def build_class_map(labels: Iterable[str], scale: RatingScale | None = None) -> ClassIndexMap:
    """Collapse ``labels`` to their distinct grades, sorted best to worst.

    >>> build_class_map(["D", "A+", "D", "BB+"]).entries
    {'A+': 0, 'BB+': 1, 'D': 2}
    """
    scale = scale if scale is not None else RatingScale()
    positions = {parse_grade(label, scale) for label in labels}
    if not positions:
        raise DataError("cannot build a class map from an empty label collection")
    return ClassIndexMap(tuple(scale.grades[p] for p in sorted(positions)), scale)

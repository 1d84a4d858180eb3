"""The (item x annotator) label-set grid consumed by the agreement metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping


@dataclass(frozen=True, eq=False)
class LabelMatrix:
    """Sparse grid of label sets.

    A present-but-empty cell records an explicit rejection (the annotator
    decided no relation holds); an absent cell was never annotated. Labels
    can be any hashable values.
    """

    items: tuple[str, ...]
    annotators: tuple[str, ...]
    cells: Mapping[tuple[int, int], frozenset]

    def cell(self, item: str, annotator: str) -> frozenset | None:
        key = (self.items.index(item), self.annotators.index(annotator))
        return self.cells.get(key)

    @classmethod
    def from_nested(
        cls, data: Mapping[str, Mapping[str, Iterable[Hashable]]]
    ) -> "LabelMatrix":
        """Build from {item: {annotator: labels}}; omit a key to mark it missing.

        Pass an empty iterable for an explicit rejection.
        """
        items = tuple(sorted(data, key=str))
        annotators = tuple(sorted({a for row in data.values() for a in row}, key=str))
        col = {a: j for j, a in enumerate(annotators)}
        cells = {}
        for i, item in enumerate(items):
            for a, labels in data[item].items():
                cells[(i, col[a])] = frozenset(labels)
        return cls(items=items, annotators=annotators, cells=cells)

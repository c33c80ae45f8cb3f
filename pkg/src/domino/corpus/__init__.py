"""The algorithm corpus: Domino sources plus expected classifications."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from ..ast import ProgramAst
from ..frontend import load_program


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    file: str
    expected: str  # least expressive atom, or "doesn't map"
    published_counts: tuple  # (stages, max atoms per stage); advisory only
    description: str
    trace: dict = field(default_factory=dict)  # field -> (lo, hi) for random packets

    @property
    def source(self) -> str:
        return resources.files(__package__).joinpath(self.file).read_text(encoding="utf-8")

    @property
    def path(self):
        return resources.files(__package__).joinpath(self.file)

    def program(self) -> ProgramAst:
        return load_program(self.source)

    @property
    def mappable(self) -> bool:
        return self.expected != "doesn't map"


def load_corpus() -> list[CorpusEntry]:
    raw = json.loads(resources.files(__package__).joinpath("manifest.json").read_text(encoding="utf-8"))
    return [
        CorpusEntry(
            e["name"],
            e["file"],
            e["expected"],
            tuple(e["published_counts"]),
            e["description"],
            {k: tuple(v) for k, v in e.get("trace", {}).items()},
        )
        for e in raw["entries"]
    ]


def entry(name: str) -> CorpusEntry:
    """Look up an entry by display name or file stem."""
    for e in load_corpus():
        if name in (e.name, e.file, e.file.rsplit(".", 1)[0]):
            return e
    raise KeyError(name)

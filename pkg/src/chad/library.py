"""The bundled program corpus.

Each ``.chad`` file starts with comment lines; one of them is
``-- tags: a, b, ...``. Tags drive which checks a program takes part in
(``loop``, ``diverge``, ``partial``, ``illtyped``, ``sum-input``).
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import syntax as S
from .source_lang import parse_program


@dataclass(frozen=True)
class Entry:
    name: str
    path: Path
    tags: tuple

    @property
    def text(self) -> str:
        return self.path.read_text()

    def program(self) -> S.Program:
        return parse_program(self.text)

    def has(self, tag: str) -> bool:
        return tag in self.tags


def corpus_dir() -> Path:
    return Path(str(resources.files("chad") / "corpus"))


def _tags(text: str) -> tuple:
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("-- tags:"):
            return tuple(t.strip() for t in line[len("-- tags:"):].split(",") if t.strip())
    return ()


def entries() -> list:
    """All corpus programs, sorted by name."""
    out = []
    for path in sorted(corpus_dir().glob("*.chad")):
        out.append(Entry(path.stem, path, _tags(path.read_text())))
    return out


def entry(name: str) -> Entry:
    for e in entries():
        if e.name == name:
            return e
    raise KeyError(f"no corpus program named {name!r}")


def well_typed() -> list:
    return [e for e in entries() if not e.has("illtyped")]


def resolve_path(path: str) -> Path:
    """``path`` if it exists, else the corpus file with the same name."""
    p = Path(path)
    if p.exists():
        return p
    candidate = corpus_dir() / p.name
    if candidate.exists():
        return candidate
    return p

"""Corpus ingestion: directories of text files or line-delimited datasets.

Documents come back in lexicographic id order regardless of how they are
stored, so downstream score files are byte-identical across input
orderings. Unreadable files are reported and skipped; duplicate ids are
fatal. Empty documents are kept (with their emptiness detectable) so the
scorer can report them as skipped rather than silently dropping them.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError

LABELS_FILENAMES = ("labels.tsv", "labels.csv")


@dataclass(frozen=True)
class Document:
    id: str
    text: bytes
    label: str | None = None

    @property
    def is_empty(self) -> bool:
        return len(self.text.strip()) == 0


def read_labels(path: Path) -> dict[str, str]:
    """Parse an id/label table: one ``id<TAB|,>label`` row per line."""
    sep = "\t" if path.suffix == ".tsv" else ","
    labels: dict[str, str] = {}
    for ln, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if sep not in line:
            raise DataError(f"{path}:{ln}: expected 'id{sep}label'")
        doc_id, label = line.rsplit(sep, 1)
        labels[doc_id.strip()] = label.strip()
    return labels


def ingest(path: str | Path, labels_path: str | Path | None = None) -> list[Document]:
    """Load a directory of .txt files or a .jsonl dataset file."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"input path {path} does not exist")
    if path.is_dir():
        docs = _ingest_directory(path, labels_path)
    else:
        docs = _ingest_jsonl(path, labels_path)
    seen: set[str] = set()
    for d in docs:
        if d.id in seen:
            raise DataError(f"duplicate document id {d.id!r}")
        seen.add(d.id)
    docs.sort(key=lambda d: d.id)
    return docs


def _ingest_directory(root: Path, labels_path) -> list[Document]:
    labels: dict[str, str] = {}
    if labels_path is not None:
        labels = read_labels(Path(labels_path))
    else:
        for name in LABELS_FILENAMES:
            cand = root / name
            if cand.exists():
                labels = read_labels(cand)
                break
    docs: list[Document] = []
    for fp in sorted(root.rglob("*.txt")):
        doc_id = fp.relative_to(root).as_posix()
        try:
            text = fp.read_bytes()
        except OSError as exc:
            print(f"warning: skipping unreadable file {fp}: {exc}", file=sys.stderr)
            continue
        docs.append(Document(id=doc_id, text=text, label=labels.get(doc_id)))
    return docs


def _ingest_jsonl(path: Path, labels_path) -> list[Document]:
    labels: dict[str, str] = {}
    if labels_path is not None:
        labels = read_labels(Path(labels_path))
    docs: list[Document] = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{ln}: bad JSON: {exc}") from exc
            if "id" not in obj or "text" not in obj:
                raise DataError(f"{path}:{ln}: need 'id' and 'text' fields")
            doc_id = str(obj["id"])
            docs.append(
                Document(
                    id=doc_id,
                    text=str(obj["text"]).encode("utf-8"),
                    label=obj.get("label", labels.get(doc_id)),
                )
            )
    return docs

"""Document corpus and researcher relevance judgments."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

CORPUS_FILE = "corpus.jsonl"
JUDGMENTS_FILE = "judgments.csv"
MANIFEST_FILE = "manifest.json"


class IngestError(ValueError):
    """Raised when an input file cannot be parsed; carries the line number."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    abstract: str | None = None
    collection_id: str = ""

    def to_json(self) -> str:
        return json.dumps(
            {"doc_id": self.doc_id, "title": self.title, "abstract": self.abstract,
             "collection_id": self.collection_id},
            ensure_ascii=False,
        )


@dataclass
class JudgmentSet:
    researcher_id: str
    relevant_doc_ids: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class CorpusStats:
    doc_count: int
    abstract_count: int
    collection_count: int
    rejected_count: int


@dataclass(frozen=True)
class JudgmentStats:
    researcher_count: int
    pair_count: int
    dropped_unresolvable: int


def _validate(row, path, lineno) -> Document | None:
    if not isinstance(row, dict):
        raise IngestError(path, lineno, "expected a JSON object")
    doc_id = row.get("doc_id")
    title = row.get("title")
    abstract = row.get("abstract")
    collection = row.get("collection_id") or ""
    if doc_id is None or not str(doc_id).strip():
        return None
    if not isinstance(title, str) or not title.strip():
        return None
    if abstract is not None and not isinstance(abstract, str):
        return None
    return Document(str(doc_id), title, abstract, str(collection))


class CorpusStore:
    """Single-writer document store; treat as read-only once ingested."""

    def __init__(self):
        self._docs: dict[str, Document] = {}
        self._judgments: dict[str, JudgmentSet] = {}

    # -- documents ---------------------------------------------------------

    def ingest_corpus(self, path, format: str = "jsonl") -> CorpusStats:
        path = Path(path)
        rejected = 0
        for lineno, row in _read_rows(path, format):
            doc = _validate(row, path, lineno)
            if doc is None:
                rejected += 1
                continue
            if doc.doc_id in self._docs:
                rejected += 1
                continue
            self._docs[doc.doc_id] = doc
        if rejected:
            log.warning("%d corpus rows rejected from %s", rejected, path)
        return self.stats(rejected)

    def add_document(self, doc: Document) -> bool:
        """Store ``doc`` unless its id is taken; returns whether it was stored."""
        if doc.doc_id in self._docs or not doc.doc_id or not doc.title.strip():
            return False
        self._docs[doc.doc_id] = doc
        return True

    def stats(self, rejected: int = 0) -> CorpusStats:
        docs = self._docs.values()
        return CorpusStats(
            doc_count=len(self._docs),
            abstract_count=sum(d.abstract is not None for d in docs),
            collection_count=len({d.collection_id for d in docs}),
            rejected_count=rejected,
        )

    def get_document(self, doc_id: str) -> Document | None:
        return self._docs.get(doc_id)

    def __contains__(self, doc_id) -> bool:
        return doc_id in self._docs

    def __len__(self) -> int:
        return len(self._docs)

    def documents(self) -> list[Document]:
        return list(self._docs.values())

    # -- judgments ---------------------------------------------------------

    def ingest_judgments(self, path) -> JudgmentStats:
        path = Path(path)
        dropped = 0
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                return self.judgment_stats(0)
            header = [h.strip() for h in header]
            try:
                ri, di = header.index("researcher_id"), header.index("doc_id")
            except ValueError:
                raise IngestError(path, 1, "header must contain researcher_id,doc_id") from None
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) <= max(ri, di):
                    raise IngestError(path, lineno, f"expected {len(header)} columns, got {len(row)}")
                rid, did = row[ri].strip(), row[di].strip()
                if did not in self._docs:
                    dropped += 1
                    continue
                self._judgments.setdefault(rid, JudgmentSet(rid)).relevant_doc_ids.add(did)
        if dropped:
            log.warning("%d judgment pairs reference unknown documents", dropped)
        return self.judgment_stats(dropped)

    def add_judgment(self, researcher_id: str, doc_id: str) -> bool:
        if doc_id not in self._docs:
            return False
        self._judgments.setdefault(researcher_id, JudgmentSet(researcher_id)).relevant_doc_ids.add(doc_id)
        return True

    def judgment_stats(self, dropped: int = 0) -> JudgmentStats:
        return JudgmentStats(
            researcher_count=len(self._judgments),
            pair_count=sum(len(j.relevant_doc_ids) for j in self._judgments.values()),
            dropped_unresolvable=dropped,
        )

    def judgments(self) -> list[JudgmentSet]:
        return [self._judgments[r] for r in sorted(self._judgments)]

    def get_judgments(self, researcher_id: str) -> JudgmentSet | None:
        return self._judgments.get(researcher_id)

    # -- persistence -------------------------------------------------------

    def export_corpus(self) -> str:
        return "".join(d.to_json() + "\n" for d in self._docs.values())

    def export_judgments(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["researcher_id", "doc_id"])
        for j in self.judgments():
            for did in sorted(j.relevant_doc_ids):
                writer.writerow([j.researcher_id, did])
        return buf.getvalue()

    def save(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / CORPUS_FILE).write_text(self.export_corpus(), encoding="utf-8")
        (directory / JUDGMENTS_FILE).write_text(self.export_judgments(), encoding="utf-8")
        stats, jstats = self.stats(), self.judgment_stats()
        manifest = {
            "doc_count": stats.doc_count,
            "abstract_count": stats.abstract_count,
            "collection_count": stats.collection_count,
            "researcher_count": jstats.researcher_count,
            "pair_count": jstats.pair_count,
        }
        (directory / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2) + "\n")
        return directory

    @classmethod
    def load(cls, directory) -> "CorpusStore":
        directory = Path(directory)
        corpus = directory / CORPUS_FILE
        if not corpus.exists():
            raise FileNotFoundError(f"missing corpus store file: {corpus}")
        store = cls()
        store.ingest_corpus(corpus, "jsonl")
        judgments = directory / JUDGMENTS_FILE
        if judgments.exists():
            store.ingest_judgments(judgments)
        return store


def _read_rows(path: Path, format: str):
    if format == "jsonl":
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    yield lineno, json.loads(line)
                except json.JSONDecodeError as exc:
                    raise IngestError(path, lineno, f"invalid JSON: {exc.msg}") from None
    elif format == "csv":
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                return
            missing = {"doc_id", "title"} - set(reader.fieldnames)
            if missing:
                raise IngestError(path, 1, f"missing columns: {sorted(missing)}")
            for row in reader:
                lineno = reader.line_num
                if None in row:
                    raise IngestError(path, lineno, "too many columns")
                # CSV cannot express null; an empty abstract cell means "no abstract"
                if not row.get("abstract"):
                    row["abstract"] = None
                yield lineno, row
    else:
        raise ValueError(f"unknown corpus format {format!r}")


def load_corpus(path, judgments=None, format: str = "jsonl") -> CorpusStore:
    store = CorpusStore()
    store.ingest_corpus(path, format)
    if judgments is not None:
        store.ingest_judgments(judgments)
    return store

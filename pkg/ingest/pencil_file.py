"""
Read and write pencil JSON files; normalize into Pencil objects.
"""
import hashlib
import json
from pathlib import Path
from typing import Optional, Union

from app.schemas import PencilFile
from spectral.pencil import Pencil


def pencil_sha256(doc: PencilFile) -> str:
    """Hash of the canonical JSON form (sorted keys, no whitespace, name excluded)."""
    canonical = json.dumps({"k": doc.k, "Q": [[list(c) for c in q] for q in doc.Q]}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def parse_pencil(data: Union[str, bytes, dict]) -> PencilFile:
    if isinstance(data, dict):
        return PencilFile.model_validate(data)
    return PencilFile.model_validate_json(data)


def to_pencil(doc: PencilFile) -> Pencil:
    return Pencil.from_complex(doc.rows())


def load_pencil(path: Union[str, Path]) -> tuple[PencilFile, Pencil]:
    """Raises OSError on unreadable files and pydantic ValidationError on bad content."""
    doc = parse_pencil(Path(path).read_text(encoding="utf-8"))
    return doc, to_pencil(doc)


def from_pencil(P: Pencil, name: Optional[str] = None) -> PencilFile:
    rows = []
    for q in P.Q:
        coeffs = [(float(c.real), float(c.imag)) for c in q.coeffs]
        rows.append(coeffs or [(0.0, 0.0)])
    return PencilFile(k=P.k, Q=rows, name=name)


def dump_pencil(P: Pencil, path: Union[str, Path], name: Optional[str] = None) -> PencilFile:
    """Write P as pencil JSON, low-to-high coefficients per Q_i."""
    doc = from_pencil(P, name)
    Path(path).write_text(doc.model_dump_json(indent=2, exclude_none=True) + "\n", encoding="utf-8")
    return doc

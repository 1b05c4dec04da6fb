"""
CSV and JSON writers. Every CSV opens with a comment line recording the
pencil hash, tool version, digit count and data origin, then a header row.
"""
import csv
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import mpmath
from pydantic import BaseModel

from spectral import __version__


def header_comment(pencil_sha: str, digits: int, origin: str) -> str:
    return f"# pencil_sha256={pencil_sha} tool_version={__version__} digits={digits} origin={origin}"


def format_real(x: Any, digits: int) -> str:
    if isinstance(x, (mpmath.mpf, mpmath.mpc)):
        return mpmath.nstr(mpmath.re(x), digits, strip_zeros=False, min_fixed=1, max_fixed=0)
    return repr(float(x))


def split_complex(z: Any, digits: int) -> list[str]:
    """(re, im) columns; mpmath values keep `digits` significant digits."""
    if isinstance(z, mpmath.mpc):
        return [format_real(z.real, digits), format_real(z.imag, digits)]
    z = complex(z)
    return [repr(z.real), repr(z.imag)]


def write_csv(
    path: Union[str, Path],
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    *,
    pencil_sha: str,
    digits: int,
    origin: str,
) -> Path:
    """RFC-4180 CSV; rows must already be flat strings or numbers."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(header_comment(pencil_sha, digits, origin) + "\r\n")
        writer = csv.writer(f, lineterminator="\r\n")
        writer.writerow(list(columns))
        for row in rows:
            writer.writerow([c if isinstance(c, str) else repr(c) for c in row])
    return path


def complex_rows(values: Iterable[Any], digits: int, index: bool = True) -> list[list[str]]:
    return [([str(i)] if index else []) + split_complex(v, digits) for i, v in enumerate(values)]


def write_json(path: Union[str, Path], model: BaseModel) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path

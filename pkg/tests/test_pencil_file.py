"""Pencil JSON parsing, hashing and round trips."""
import pytest
from pydantic import ValidationError

from ingest.pencil_file import dump_pencil, load_pencil, parse_pencil, pencil_sha256


def _doc(**overrides):
    doc = {"k": 1, "Q": [[[-1.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]}
    doc.update(overrides)
    return doc


class TestParsePencil:
    def test_accepts_dict_and_json(self):
        a = parse_pencil(_doc())
        b = parse_pencil('{"k": 1, "Q": [[[-1, 0]], [[0, 0], [1, 0]]]}')
        assert a.k == b.k == 1
        assert a.rows() == b.rows()

    def test_wrong_number_of_polynomials(self):
        with pytest.raises(ValidationError, match="expected 2"):
            parse_pencil(_doc(Q=[[[1.0, 0.0]]]))

    def test_degree_too_high(self):
        with pytest.raises(ValidationError, match="exceeds"):
            parse_pencil(_doc(Q=[[[1.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]))

    def test_trailing_zeros_do_not_count(self):
        doc = parse_pencil(_doc(Q=[[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]))
        assert doc.k == 1

    def test_zero_leading_polynomial(self):
        with pytest.raises(ValidationError, match="identically zero"):
            parse_pencil(_doc(Q=[[[1.0, 0.0]], [[0.0, 0.0]]]))

    def test_k_must_be_positive(self):
        with pytest.raises(ValidationError):
            parse_pencil(_doc(k=0, Q=[[[1.0, 0.0]]]))


class TestHash:
    def test_name_is_ignored(self):
        assert pencil_sha256(parse_pencil(_doc())) == pencil_sha256(parse_pencil(_doc(name="other")))

    def test_coefficients_matter(self):
        changed = _doc(Q=[[[-2.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]])
        assert pencil_sha256(parse_pencil(_doc())) != pencil_sha256(parse_pencil(changed))


def test_dump_then_load(fig1, tmp_path):
    path = tmp_path / "copy.json"
    written = dump_pencil(fig1, path, name="copy")
    doc, P = load_pencil(path)
    assert doc.name == "copy"
    assert pencil_sha256(doc) == pencil_sha256(written)
    assert P.k == fig1.k
    assert P.diagonal == fig1.diagonal


def test_load_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_pencil(tmp_path / "absent.json")

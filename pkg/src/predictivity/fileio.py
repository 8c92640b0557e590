"""Reading and writing datasets, model specs, study configs and CSV tables."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import disease_model as dm
from .errors import DataError
from .estimators import CASE, LabeledSample

__all__ = [
    "ParsedDataset",
    "parse_dataset",
    "write_dataset",
    "parse_model_spec",
    "parse_model_text",
    "format_model_spec",
    "StudyRow",
    "parse_study_config",
    "write_csv",
    "fmt",
    "file_digest",
    "ORDERS",
]

ORDERS = {"lex": dm.LEX_ORDER, "first-fastest": dm.FIRST_FASTEST_ORDER, "listed": dm.LISTED_ORDER}
_DELIMITERS = {",": ",", "comma": ",", "\t": "\t", "tab": "\t", "\\t": "\t"}


@dataclass
class ParsedDataset:
    """A parsed case-control file.

    ``codes`` maps each categorical column to its ``value -> code`` dictionary;
    integer-valued columns keep their values and are absent from it.
    """

    sample: LabeledSample
    codes: dict[str, dict[str, int]] = field(default_factory=dict)
    label_column: str = "label"
    delimiter: str = ","

    @property
    def n_rows(self) -> int:
        return len(self.sample.y)

    def summary(self) -> str:
        return f"{self.n_rows} rows, {self.sample.n_d} cases, {self.sample.n_h} controls, {self.sample.n_vars} variables"


def _detect_delimiter(header: str) -> str:
    if "\t" in header:
        return "\t"
    if "," in header:
        return ","
    # a single column is a label with no variables; let the arity check complain
    return ","


def parse_dataset(
    path,
    label_column: str = "label",
    delimiter: str | None = None,
    class_encoding: dict[str, str] | None = None,
) -> ParsedDataset:
    """Read a comma- or tab-separated case-control file with a header row.

    ``class_encoding`` maps raw label strings to ``'d'`` or ``'h'``; the
    default accepts ``d``/``h``, ``case``/``control`` and ``1``/``0``.
    """
    path = Path(path)
    text = path.read_text()
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DataError(f"{path}: file is empty")
    if delimiter is None:
        delim = _detect_delimiter(lines[0])
    elif delimiter in _DELIMITERS:
        delim = _DELIMITERS[delimiter]
    else:
        raise DataError(f"unsupported delimiter {delimiter!r}; use comma or tab")
    rows = list(csv.reader(lines, delimiter=delim))
    header = [h.strip() for h in rows[0]]
    if label_column not in header:
        raise DataError(f"{path}: no label column {label_column!r} in header")
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    if not body:
        raise DataError(f"{path}: no data rows")
    for i, r in enumerate(rows[1:], start=2):
        if any(c.strip() for c in r) and len(r) != len(header):
            raise DataError(f"{path}: row {i} has {len(r)} fields, header has {len(header)}")

    encoding = class_encoding or {"d": "d", "h": "h", "case": "d", "control": "h", "1": "d", "0": "h"}
    li = header.index(label_column)
    labels = []
    for i, r in enumerate(body, start=2):
        raw = r[li].strip()
        if raw not in encoding or encoding[raw] not in ("d", "h"):
            raise DataError(f"{path}: row {i}: unknown label {raw!r}")
        labels.append(encoding[raw])
    if len(set(labels)) != 2:
        raise DataError(f"{path}: labels must contain both classes, found {sorted(set(labels))}")

    names, columns, codes = [], [], {}
    for j, name in enumerate(header):
        if j == li:
            continue
        values = [r[j].strip() for r in body]
        if all(v.isdigit() for v in values):
            columns.append(np.array([int(v) for v in values], dtype=np.int64))
        else:
            mapping = {v: c for c, v in enumerate(sorted(set(values)))}
            codes[name] = mapping
            columns.append(np.array([mapping[v] for v in values], dtype=np.int64))
        names.append(name)
    x = np.column_stack(columns) if columns else np.zeros((len(body), 0), dtype=np.int64)
    sample = LabeledSample.from_labels(labels, x, tuple(names))
    return ParsedDataset(sample, codes, label_column, delim)


def write_dataset(sample: LabeledSample, path, label_column: str = "label", delimiter: str = ",", codes=None) -> Path:
    """Write ``sample`` with ``d``/``h`` labels first, one column per variable.

    ``codes`` (as returned by :func:`parse_dataset`) restores categorical
    strings, so parse-then-write reproduces the original values.
    """
    if not sample.is_two_class:
        raise DataError("only two-class samples can be written")
    codes = codes or {}
    decode = {name: {c: v for v, c in m.items()} for name, m in codes.items()}
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow([label_column, *sample.variable_names])
        for yi, row in zip(sample.y, sample.x.tolist()):
            cells = [decode[n][v] if n in decode else v for n, v in zip(sample.variable_names, row)]
            w.writerow(["d" if yi == CASE else "h", *cells])
    return path


def _spec_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"model spec line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            yield lineno, key, json.loads(value)
        except json.JSONDecodeError as exc:
            raise DataError(f"model spec line {lineno}: {exc.msg}") from None


def parse_model_spec(path) -> dm.DiseaseModel:
    """Read a disease model spec file; see :func:`parse_model_text`."""
    return parse_model_text(Path(path).read_text())


def parse_model_text(text: str) -> dm.DiseaseModel:
    """Parse a disease model from ``key = JSON`` lines.

    Keys: ``maf`` (list), ``influential`` (list of 0-based SNP indices),
    ``t`` (either a list in the order named by ``order``, or an object keyed
    by genotype strings such as ``"21"``), and optional ``order``
    (``lex``, ``first-fastest`` or ``listed``; default ``lex``).  Lines may
    carry ``#`` comments.
    """
    entries = {}
    for lineno, key, value in _spec_lines(text):
        if key not in ("maf", "influential", "t", "order"):
            raise DataError(f"model spec line {lineno}: unknown key {key!r}")
        entries[key] = value
    missing = {"maf", "influential", "t"} - entries.keys()
    if missing:
        raise DataError(f"model spec is missing {sorted(missing)}")
    maf, infl, t = entries["maf"], entries["influential"], entries["t"]
    if isinstance(t, dict):
        penetrance = {}
        for k, v in t.items():
            if not k.isdigit() or len(k) != len(infl):
                raise DataError(f"penetrance key {k!r} is not a genotype of length {len(infl)}")
            penetrance[tuple(int(c) for c in k)] = float(v)
        return dm.DiseaseModel(tuple(maf), tuple(infl), penetrance)
    order_name = entries.get("order", "lex")
    if len(infl) == 1:
        order = None
    elif order_name in ORDERS and len(infl) == 2:
        order = ORDERS[order_name]
    elif order_name == "lex":
        order = None
    else:
        raise DataError(f"order {order_name!r} is not available for {len(infl)} influential SNPs")
    return dm.DiseaseModel.from_values(tuple(maf), tuple(infl), tuple(t), order=order)


def format_model_spec(model: dm.DiseaseModel) -> str:
    t = {"".join(map(str, u)): model.penetrance[u] for u in model.tuples()}
    return (
        f"maf = {json.dumps(list(model.maf))}\n"
        f"influential = {json.dumps(list(model.influential))}\n"
        f"t = {json.dumps(t)}\n"
    )


@dataclass(frozen=True)
class StudyRow:
    model: dm.DiseaseModel
    reps: int
    n: int


def parse_study_config(path) -> list[StudyRow]:
    """Bias-study rows from a CSV with columns ``maf, influential, t, order, reps, n``.

    Vector fields are space-separated; ``order`` may be left empty (lex).
    """
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader((line for line in fh if not line.lstrip().startswith("#")))
        need = {"maf", "influential", "t", "reps", "n"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise DataError(f"{path}: study config needs columns {sorted(need)}")
        rows = []
        for i, rec in enumerate(reader, start=2):
            try:
                maf = tuple(float(v) for v in rec["maf"].split())
                infl = tuple(int(v) for v in rec["influential"].split())
                t = tuple(float(v) for v in rec["t"].split())
                reps, n = int(rec["reps"]), int(rec["n"])
            except (ValueError, AttributeError):
                raise DataError(f"{path}: row {i} is malformed") from None
            order_name = (rec.get("order") or "lex").strip() or "lex"
            if order_name not in ORDERS:
                raise DataError(f"{path}: row {i}: unknown order {order_name!r}")
            order = ORDERS[order_name] if len(infl) == 2 else None
            rows.append(StudyRow(dm.DiseaseModel.from_values(maf, infl, t, order=order), reps, n))
    if not rows:
        raise DataError(f"{path}: no study rows")
    return rows


def fmt(value, decimals: int) -> str:
    """Fixed-decimal text, with ``-0.000`` normalized to ``0.000``."""
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    text = f"{v:.{decimals}f}"
    return text[1:] if text.startswith("-") and float(text) == 0 else text


def write_csv(path, columns, rows, decimals: int) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v, decimals) for v in row])
    return path


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()

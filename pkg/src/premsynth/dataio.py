"""File formats: CSV records, JSON histograms, query families and schemas.

Private inputs are read from disk like any other file. Nothing here is part
of the differential-privacy guarantee.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import BinaryQuery, Domain, Histogram, QueryFamily, RealQuery

HISTOGRAM_FORMAT = "premsynth-histogram/1"
FAMILY_FORMAT = "premsynth-queries/1"


def _g17(x: float) -> str:
    return format(float(x), ".17g")


# --- schemas -------------------------------------------------------------


def schema_to_dict(domain: Domain) -> dict:
    if domain.attributes is None:
        raise ValueError("domain has no attribute schema")
    return {"attributes": [{"name": n, "categories": list(c)} for n, c in domain.attributes]}


def domain_from_dict(d: dict) -> Domain:
    if "attributes" in d and d["attributes"] is not None:
        try:
            attrs = [(a["name"], list(a["categories"])) for a in d["attributes"]]
        except (KeyError, TypeError):
            raise ValueError("schema attributes need 'name' and 'categories'") from None
        return Domain.from_schema(attrs)
    if "domain_size" in d:
        return Domain(int(d["domain_size"]))
    raise ValueError("schema needs 'attributes' or 'domain_size'")


def read_schema(path) -> Domain:
    return domain_from_dict(json.loads(Path(path).read_text()))


def write_schema(domain: Domain, path) -> None:
    Path(path).write_text(json.dumps(schema_to_dict(domain), indent=2) + "\n")


# --- CSV -----------------------------------------------------------------


def ingest_csv(path, schema) -> tuple[Domain, Histogram]:
    """Count CSV rows into a histogram over the schema's mixed-radix domain."""
    domain = schema if isinstance(schema, Domain) else (
        domain_from_dict(schema) if isinstance(schema, dict) else read_schema(schema)
    )
    if domain.attributes is None:
        raise ValueError("CSV ingestion needs an attribute schema")
    names = [n for n, _ in domain.attributes]
    lookup = [{label: i for i, label in enumerate(c)} for _, c in domain.attributes]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if header != names:
            raise ValueError(f"{path}: header {header} does not match schema attributes {names}")
        digits = []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise ValueError(f"{path}: row {row_no} has {len(row)} cells, expected {len(names)}")
            rec = []
            for col, (cell, table) in enumerate(zip(row, lookup)):
                cell = cell.strip()
                if cell not in table:
                    raise ValueError(
                        f"{path}: row {row_no}, column {names[col]!r}: unknown label {cell!r}"
                    )
                rec.append(table[cell])
            digits.append(rec)
    if not digits:
        raise ValueError(f"{path}: no data rows")
    idx = [domain.encode(rec) for rec in digits]
    return domain, Histogram(np.bincount(idx, minlength=domain.size).astype(np.float64))


def export_csv(h: Histogram, domain: Domain, path) -> None:
    """One row per unit of mass; the histogram must be integer-valued."""
    if domain.attributes is None:
        raise ValueError("CSV export needs an attribute schema")
    if not h.is_integral:
        raise ValueError("only integer-valued histograms can be exported as records")
    records = np.repeat(np.arange(h.size), np.round(h.weights).astype(np.int64))
    write_records_csv(records, domain, path)


def write_records_csv(records, domain: Domain, path) -> None:
    labels = [c for _, c in domain.attributes]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([n for n, _ in domain.attributes])
        for r in records:
            w.writerow([labels[j][v] for j, v in enumerate(domain.decode(int(r)))])


# --- JSON histograms and families ----------------------------------------


def histogram_to_json(h: Histogram, domain: Domain | None = None) -> str:
    # weights at 17 significant digits, which round-trips any double exactly
    weights = ", ".join(_g17(w) for w in h.weights)
    head = {"format": HISTOGRAM_FORMAT, "domain_size": h.size}
    if domain is not None and domain.attributes is not None:
        head["schema"] = schema_to_dict(domain)
    body = json.dumps(head, sort_keys=True)[:-1]
    return f'{body}, "weights": [{weights}]}}\n'


def histogram_from_json(text: str) -> tuple[Histogram, Domain]:
    d = json.loads(text)
    if "weights" not in d:
        raise ValueError("histogram file has no 'weights'")
    h = Histogram(np.asarray(d["weights"], dtype=np.float64))
    if "domain_size" in d and int(d["domain_size"]) != h.size:
        raise ValueError(f"domain_size {d['domain_size']} disagrees with {h.size} weights")
    domain = domain_from_dict(d["schema"]) if "schema" in d else Domain(h.size)
    if domain.size != h.size:
        raise ValueError("schema size disagrees with the number of weights")
    return h, domain


def write_histogram(h: Histogram, path, domain: Domain | None = None) -> None:
    Path(path).write_text(histogram_to_json(h, domain))


def read_histogram(path) -> tuple[Histogram, Domain]:
    return histogram_from_json(Path(path).read_text())


def family_to_dict(F: QueryFamily) -> dict:
    if F.is_binary:
        return {
            "format": FAMILY_FORMAT,
            "domain_size": F.domain_size,
            "kind": "binary",
            "queries": [q.indices() for q in F],
        }
    return {
        "format": FAMILY_FORMAT,
        "domain_size": F.domain_size,
        "kind": "real",
        "queries": [q.values.tolist() for q in F],
    }


def family_from_dict(d: dict) -> QueryFamily:
    try:
        size = int(d["domain_size"])
        kind = d["kind"]
        queries = d["queries"]
    except KeyError as exc:
        raise ValueError(f"query family file is missing {exc.args[0]!r}") from None
    if kind == "binary":
        return QueryFamily(BinaryQuery.from_indices(q, size) for q in queries)
    if kind == "real":
        return QueryFamily(RealQuery(np.asarray(q, dtype=float)) for q in queries)
    raise ValueError(f"unknown query kind {kind!r}")


def write_family(F: QueryFamily, path) -> None:
    Path(path).write_text(json.dumps(family_to_dict(F)) + "\n")


def read_family(path) -> QueryFamily:
    return family_from_dict(json.loads(Path(path).read_text()))

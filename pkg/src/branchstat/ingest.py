"""Reading and writing grid cases.

Two formats are understood:

* a MATPOWER case file, of which only ``baseMVA``, ``bus`` (``bus_i``,
  ``baseKV``) and ``branch`` (``fbus, tbus, r, x, rateA, ratio, status``)
  are interpreted;
* a flat branch CSV with the columns listed in :data:`CSV_COLUMNS`.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InvalidInputError, ParseError
from .grid_model import (
    DEFAULT_KV_TOLERANCE,
    BaseQuantities,
    BranchKind,
    BranchRecord,
    check_coordinate,
)

EARTH_RADIUS_KM = 6371.0

CSV_COLUMNS = (
    "id", "kind", "from_bus", "to_bus", "kv_high", "kv_low", "x_pu", "r_pu",
    "s_base_mva", "rating_mva", "length_km", "from_lat", "from_lon", "to_lat", "to_lon",
)
CSV_MANDATORY = ("id", "kind", "kv_high", "kv_low", "x_pu", "r_pu", "s_base_mva")
_GEO_COLUMNS = ("from_lat", "from_lon", "to_lat", "to_lon")

# MATPOWER column indices (0-based)
_BUS_I, _BUS_BASEKV = 0, 9
_BR_F, _BR_T, _BR_R, _BR_X, _BR_RATEA, _BR_RATIO, _BR_STATUS = 0, 1, 2, 3, 5, 8, 10


class CaseFormat(Enum):
    MATPOWER = "matpower"
    CSV = "csv"

    @classmethod
    def from_path(cls, path: str | Path) -> CaseFormat:
        suffix = Path(path).suffix.lower()
        if suffix == ".m":
            return cls.MATPOWER
        if suffix in (".csv", ".txt"):
            return cls.CSV
        raise InvalidInputError(f"cannot infer case format from {path!s}; pass it explicitly")


@dataclass(frozen=True)
class CaseSource:
    format: CaseFormat
    path: Path
    system_base: BaseQuantities | None = None


@dataclass
class ParsedCase:
    records: list[BranchRecord]
    warnings: list[str]
    format: CaseFormat
    text: str
    name: str = "case"


def great_circle_km(p1: tuple[float, float], p2: tuple[float, float]) -> float:
    """Haversine distance in km between two (latitude, longitude) points in degrees."""
    check_coordinate(*p1)
    check_coordinate(*p2)
    lat1, lon1 = map(math.radians, p1)
    lat2, lon2 = map(math.radians, p2)
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    # rounding can push h a hair above 1 for antipodal points
    return 2.0 * EARTH_RADIUS_KM * math.asin(math.sqrt(min(1.0, h)))


def fill_line_lengths(records: Iterable[BranchRecord]) -> list[BranchRecord]:
    """Fill missing line lengths from endpoint geography.

    Explicit lengths win. Filled records get ``length_estimated=True``.
    """
    out = []
    for rec in records:
        if rec.kind is BranchKind.LINE and rec.length_km is None and rec.endpoints_geo is not None:
            d = great_circle_km(*rec.endpoints_geo)
            if d > 0:
                rec = replace(rec, length_km=d, length_estimated=True)
        out.append(rec)
    return out


# --- MATPOWER ---------------------------------------------------------------

_ASSIGN = re.compile(r"^\s*mpc\.(\w+)\s*=\s*(.*)$")


@dataclass
class _Row:
    line: int
    values: list[float]
    span: tuple[int, int]  # character offsets of the row in the original text


def _strip_comment(line: str) -> str:
    pos = line.find("%")
    return line if pos < 0 else line[:pos]


def _matpower_tables(text: str) -> tuple[dict[str, float], dict[str, list[_Row]], dict[str, int]]:
    scalars: dict[str, float] = {}
    tables: dict[str, list[_Row]] = {}
    starts: dict[str, int] = {}
    current: str | None = None
    offset = 0
    for lineno, raw in enumerate(text.splitlines(keepends=True), start=1):
        line_start = offset
        offset += len(raw)
        body = _strip_comment(raw.rstrip("\r\n"))
        pos = 0
        if current is None:
            m = _ASSIGN.match(body)
            if not m:
                continue
            name, rhs = m.group(1), m.group(2)
            if "[" not in rhs:
                try:
                    scalars[name] = float(rhs.strip().rstrip(";").strip())
                except ValueError:
                    pass
                continue
            current = name
            tables[name] = []
            starts[name] = lineno
            pos = body.index("[", m.start(2)) + 1
        # scan the remainder of the line for rows separated by ';' and the closing ']'
        while pos <= len(body):
            end_bracket = body.find("]", pos)
            limit = end_bracket if end_bracket >= 0 else len(body)
            semi = body.find(";", pos, limit)
            stop = semi if semi >= 0 else limit
            chunk = body[pos:stop]
            tokens = chunk.replace(",", " ").split()
            if tokens:
                try:
                    values = [float(t) for t in tokens]
                except ValueError:
                    raise ParseError(f"malformed row in mpc.{current}: {chunk.strip()!r}", lineno) from None
                tables[current].append(_Row(lineno, values, (line_start + pos, line_start + stop)))
            if semi >= 0:
                pos = semi + 1
                continue
            if end_bracket >= 0:
                current = None
            break
    if current is not None:
        raise ParseError(f"unterminated matrix mpc.{current}", starts[current])
    return scalars, tables, starts


def parse_matpower_subset(
    text: str,
    s_base_override: float | None = None,
    kv_tolerance: float = DEFAULT_KV_TOLERANCE,
) -> tuple[list[BranchRecord], list[str]]:
    """Parse the branch data of a MATPOWER case.

    Branch ids are the 1-based row numbers of the branch table, so they
    stay stable when rows are dropped.
    """
    scalars, tables, starts = _matpower_tables(text)
    for name in ("bus", "branch"):
        if name not in tables:
            raise ParseError(f"missing table mpc.{name}")
    if s_base_override is not None:
        base_mva = s_base_override
    elif "baseMVA" in scalars:
        base_mva = scalars["baseMVA"]
    else:
        raise ParseError("missing mpc.baseMVA")
    if not base_mva > 0:
        raise ParseError(f"baseMVA must be positive, got {base_mva}")

    warnings: list[str] = []
    base_kv: dict[int, float] = {}
    for row in tables["bus"]:
        if len(row.values) <= _BUS_BASEKV:
            raise ParseError(f"bus row has {len(row.values)} columns, need at least {_BUS_BASEKV + 1}", row.line)
        base_kv[int(row.values[_BUS_I])] = row.values[_BUS_BASEKV]

    records: list[BranchRecord] = []
    for index, row in enumerate(tables["branch"], start=1):
        v = row.values
        if len(v) <= _BR_RATIO:
            raise ParseError(f"branch row has {len(v)} columns, need at least {_BR_RATIO + 1}", row.line)
        fbus, tbus = int(v[_BR_F]), int(v[_BR_T])
        for bus in (fbus, tbus):
            if bus not in base_kv:
                raise ParseError(f"branch {index} references unknown bus {bus}", row.line)
        if len(v) > _BR_STATUS and v[_BR_STATUS] == 0:
            warnings.append(f"line {row.line}: branch {index} out of service, dropped")
            continue
        kv_f, kv_t = base_kv[fbus], base_kv[tbus]
        if kv_f <= 0 or kv_t <= 0:
            warnings.append(f"line {row.line}: branch {index} has non-positive endpoint baseKV, skipped")
            continue
        kv_high, kv_low = max(kv_f, kv_t), min(kv_f, kv_t)
        ratio = v[_BR_RATIO]
        differs = (kv_high - kv_low) / kv_high > kv_tolerance
        kind = BranchKind.TRANSFORMER if (ratio != 0 or differs) else BranchKind.LINE
        if kind is BranchKind.LINE:
            kv_low = kv_high
        rate_a = v[_BR_RATEA]
        try:
            records.append(BranchRecord(
                id=str(index),
                kind=kind,
                from_bus=str(fbus),
                to_bus=str(tbus),
                x_pu=v[_BR_X],
                r_pu=v[_BR_R],
                system_base=BaseQuantities(kv_high, base_mva),
                rating_mva=rate_a if rate_a > 0 else None,
                kv_high=kv_high,
                kv_low=kv_low,
            ))
        except InvalidInputError as exc:
            warnings.append(f"line {row.line}: {exc}, skipped")
    return records, warnings


def _fmt(value: float) -> str:
    return repr(float(value))


def rewrite_matpower(text: str, records: Sequence[BranchRecord]) -> str:
    """Write r, x and rateA of ``records`` back into the branch table of ``text``.

    Records are matched to rows by id (1-based row number). Every other
    character of the file is preserved.
    """
    _, tables, _ = _matpower_tables(text)
    if "branch" not in tables:
        raise ParseError("missing table mpc.branch")
    by_id = {rec.id: rec for rec in records}
    pieces: list[str] = []
    cursor = 0
    for index, row in enumerate(tables["branch"], start=1):
        rec = by_id.get(str(index))
        if rec is None:
            continue
        start, stop = row.span
        chunk = text[start:stop]
        tokens = re.split(r"([\s,]+)", chunk)
        # tokens alternate value/separator; leading separator shows up as an empty first value
        value_slots = [i for i, tok in enumerate(tokens) if tok and not re.fullmatch(r"[\s,]+", tok)]
        updates = {_BR_R: rec.r_pu, _BR_X: rec.x_pu, _BR_RATEA: rec.rating_mva or 0.0}
        for column, value in updates.items():
            tokens[value_slots[column]] = _fmt(value)
        pieces.append(text[cursor:start])
        pieces.append("".join(tokens))
        cursor = stop
    pieces.append(text[cursor:])
    return "".join(pieces)


# --- branch CSV -------------------------------------------------------------

def _cell(row: dict[str, str], key: str) -> str:
    return (row.get(key) or "").strip()


def _optional_float(row: dict[str, str], key: str) -> float | None:
    text = _cell(row, key)
    return float(text) if text else None


def parse_branch_csv(text: str) -> tuple[list[BranchRecord], list[str]]:
    """Parse a branch CSV. Bad rows become warnings; missing columns are fatal."""
    reader = csv.DictReader(io.StringIO(text))
    header = [h.strip() for h in (reader.fieldnames or [])]
    if not header:
        if text.strip():
            raise ParseError("missing header row", 1)
        raise ParseError("empty file, expected a header row", 1)
    reader.fieldnames = header
    missing = [c for c in CSV_MANDATORY if c not in header]
    if missing:
        raise ParseError(f"missing mandatory column(s): {', '.join(missing)}", 1)

    records: list[BranchRecord] = []
    warnings: list[str] = []
    for row in reader:
        lineno = reader.line_num
        try:
            kind_text = _cell(row, "kind").lower()
            if kind_text not in ("line", "xfmr"):
                raise ValueError(f"kind must be 'line' or 'xfmr', got {kind_text!r}")
            kind = BranchKind(kind_text)
            kv_high = float(_cell(row, "kv_high"))
            kv_low = float(_cell(row, "kv_low"))
            geo_cells = [_optional_float(row, c) for c in _GEO_COLUMNS]
            geo = None
            if all(c is not None for c in geo_cells):
                geo = ((geo_cells[0], geo_cells[1]), (geo_cells[2], geo_cells[3]))
            records.append(BranchRecord(
                id=_cell(row, "id"),
                kind=kind,
                from_bus=_cell(row, "from_bus") or None,
                to_bus=_cell(row, "to_bus") or None,
                x_pu=float(_cell(row, "x_pu")),
                r_pu=float(_cell(row, "r_pu")),
                system_base=BaseQuantities(kv_high, float(_cell(row, "s_base_mva"))),
                rating_mva=_optional_float(row, "rating_mva"),
                kv_high=kv_high,
                kv_low=kv_low,
                length_km=_optional_float(row, "length_km"),
                endpoints_geo=geo,
            ))
        except (ValueError, InvalidInputError) as exc:
            warnings.append(f"line {lineno}: {exc}, row skipped")
    return records, warnings


def write_branch_csv(records: Iterable[BranchRecord]) -> str:
    """Serialize records to branch CSV text.

    Lengths filled in from geography are left blank so that re-reading
    reproduces the original records.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)

    def num(value: float | None) -> str:
        return "" if value is None else _fmt(value)

    for rec in records:
        geo = ("", "", "", "")
        if rec.endpoints_geo is not None:
            (a, b), (c, d) = rec.endpoints_geo
            geo = (num(a), num(b), num(c), num(d))
        length = None if rec.length_estimated else rec.length_km
        writer.writerow([
            rec.id, rec.kind.value, rec.from_bus or "", rec.to_bus or "",
            num(rec.kv_high), num(rec.kv_low), num(rec.x_pu), num(rec.r_pu),
            num(rec.system_base.s_base), num(rec.rating_mva), num(length), *geo,
        ])
    return buf.getvalue()


def read_case(
    path: str | Path,
    fmt: CaseFormat | None = None,
    s_base_override: float | None = None,
) -> ParsedCase:
    """Read a case file from disk, filling line lengths from geography."""
    path = Path(path)
    fmt = fmt or CaseFormat.from_path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror or exc}", path=str(path)) from exc
    try:
        if fmt is CaseFormat.MATPOWER:
            records, warnings = parse_matpower_subset(text, s_base_override)
        else:
            records, warnings = parse_branch_csv(text)
    except ParseError as exc:
        exc.path = str(path)
        raise
    return ParsedCase(fill_line_lengths(records), warnings, fmt, text, path.stem)


def render_case(case: ParsedCase, records: Sequence[BranchRecord]) -> str:
    """Render ``records`` in the same format ``case`` was read from."""
    if case.format is CaseFormat.MATPOWER:
        return rewrite_matpower(case.text, records)
    return write_branch_csv(records)

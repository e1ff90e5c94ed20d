"""Coefficient tables: generation, storage and validated loading.

A table file is JSON Lines text (optionally gzip-compressed):

* a header object with the format version, digit count and grid;
* one object per (order, substeps, nu index) entry, with every real number
  stored as a decimal string;
* a trailer ``{"checksum": "sha256:<hex>"}`` over all preceding bytes.

Loading checks the version and checksum, then revalidates each entry:
stages sum to one, non-real stages come in conjugate pairs, and the
certified amplification bound holds.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import mpmath as mp
import numpy as np

from .coefficients import AMPLIFICATION_FACTOR, RANGE_REDUCTION_STEP, build_schedule, certify_amplification
from .geometry import centre_crossing, fit_approx_ellipse, fit_strict_ellipse
from .gegenbauer import DEFAULT_DIGITS
from .polynomial import NU_GRID_SIZE, build_polynomial, nu_value

FORMAT_NAME = "rkg-coefficients"
FORMAT_VERSION = 1
TABLE_DIGITS = 25
TABLE_PATH_ENV = "RKG_TABLE_PATH"
SHIPPED_ORDERS = (1, 2, 4, 6)
SHIPPED_MAX_SUBSTEPS = 64
DATA_DIR = Path(__file__).with_name("data")


class TableError(ValueError):
    """Base class for unusable coefficient tables."""


class TableVersionError(TableError):
    pass


class TableChecksumError(TableError):
    pass


class TableInvariantError(TableError):
    pass


class MissingEntryError(KeyError):
    pass


@dataclass
class TableEntry:
    order: int
    substeps: int
    nu_index: int
    nu: float
    beta: float
    d: np.ndarray
    stages: np.ndarray
    alpha_strict: float
    alpha_approx: float
    amplification: float
    range_reduction: int
    text: dict | None = field(default=None, repr=False)

    @property
    def degree(self):
        return len(self.stages)

    @property
    def extent(self):
        return self.beta * (1 - RANGE_REDUCTION_STEP * self.range_reduction)

    def stability(self, z):
        """R(z) as the stage product (machine precision)."""
        z = np.asarray(z, dtype=complex)
        return np.prod(1 + np.multiply.outer(z, self.stages), axis=-1)

    def to_record(self):
        return dict(self.text)

    @classmethod
    def from_record(cls, rec):
        stages = np.array([complex(float(re), float(im)) for re, im in rec["stages"]])
        return cls(
            order=int(rec["order"]),
            substeps=int(rec["substeps"]),
            nu_index=int(rec["nu_index"]),
            nu=float(rec["nu"]),
            beta=float(rec["beta"]),
            d=np.array([float(v) for v in rec["d"]]),
            stages=stages,
            alpha_strict=float(rec["alpha_strict"]),
            alpha_approx=float(rec["alpha_approx"]),
            amplification=float(rec["amplification"]),
            range_reduction=int(rec["range_reduction"]),
            text=rec,
        )


def _dec(x, digits=TABLE_DIGITS):
    return mp.nstr(mp.mpmathify(x), digits, strip_zeros=False)


def _record(schedule, poly, nu_index, alpha_strict, alpha_approx, digits):
    return {
        "order": poly.order,
        "substeps": poly.substeps,
        "nu_index": nu_index,
        "nu": _dec(poly.nu, digits),
        "beta": _dec(poly.beta, digits),
        "d": [_dec(v, digits) for v in poly.d],
        "stages": [[_dec(s.real, digits), _dec(s.imag, digits)] for s in schedule.exact_stages],
        "alpha_strict": repr(float(alpha_strict)),
        "alpha_approx": repr(float(alpha_approx)),
        "amplification": repr(float(schedule.amplification)),
        "range_reduction": schedule.range_reduction,
    }


def entry_seed(order, substeps, nu_index):
    """Fixed shuffle seed per grid point, so regeneration is reproducible."""
    return [order, substeps, nu_index]


def generate_entries(order, substeps_range, nu_index, digits=TABLE_DIGITS, dps=DEFAULT_DIGITS, progress=None):
    """Yield TableEntry objects for one order and nu index over ``substeps_range``.

    ``dps`` is the working precision; ``digits`` the stored precision.
    """
    nu = nu_value(order, nu_index, dps)
    crossings = {}

    def crossing(n, m, nu_):
        key = (n, m)
        if key not in crossings:
            crossings[key] = centre_crossing(build_polynomial(n, m, nu_, dps))
        return crossings[key]

    for m in substeps_range:
        poly = build_polynomial(order, m, nu, dps)
        schedule = build_schedule(poly, seed=entry_seed(order, m, nu_index), dps=dps)
        a_strict = fit_strict_ellipse(poly)
        a_approx = fit_approx_ellipse(order, m, nu, crossing)
        rec = _record(schedule, poly, nu_index, a_strict, a_approx, digits)
        entry = TableEntry.from_record(rec)
        if progress:
            progress(entry)
        yield entry


class CoefficientTable:
    """In-memory grid of entries keyed by (order, substeps, nu index)."""

    def __init__(self, entries=(), digits=TABLE_DIGITS):
        self.digits = digits
        self._entries = {}
        for e in entries:
            self.add(e)

    def add(self, entry):
        self._entries[(entry.order, entry.substeps, entry.nu_index)] = entry

    def get(self, order, substeps, nu_index):
        try:
            return self._entries[(order, substeps, nu_index)]
        except KeyError:
            raise MissingEntryError(f"no coefficients for N={order}, M={substeps}, nu index {nu_index}") from None

    def __contains__(self, key):
        return key in self._entries

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries[k] for k in sorted(self._entries))

    def entries(self, order=None):
        return [e for e in self if order is None or e.order == order]

    def orders(self):
        return sorted({k[0] for k in self._entries})

    def max_substeps(self, order):
        """Largest M such that every M' <= M is present for this order."""
        present = {k[1] for k in self._entries if k[0] == order}
        m = 0
        while m + 1 in present:
            m += 1
        return m

    def merge(self, other):
        for e in other:
            self.add(e)
        return self

    def grid(self):
        keys = sorted(self._entries)
        return {
            "orders": sorted({k[0] for k in keys}),
            "substeps": sorted({k[1] for k in keys}),
            "nu_indices": sorted({k[2] for k in keys}),
        }


def _open(path, mode):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def _header(table):
    return {"format": FORMAT_NAME, "version": FORMAT_VERSION, "digits": table.digits, "grid": table.grid()}


def dumps_table(table):
    lines = [json.dumps(_header(table), sort_keys=True)]
    lines += [json.dumps(e.to_record(), sort_keys=True) for e in table]
    body = "".join(line + "\n" for line in lines)
    digest = hashlib.sha256(body.encode()).hexdigest()
    return body + json.dumps({"checksum": f"sha256:{digest}"}) + "\n"


def save_table(table, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = dumps_table(table)
    if path.suffix == ".gz":
        # fixed mtime and no stored name keep regenerated files byte-identical
        with open(path, "wb") as raw, gzip.GzipFile(filename="", fileobj=raw, mode="wb", mtime=0) as gz:
            gz.write(text.encode())
    else:
        path.write_text(text, encoding="utf-8")
    return path


def validate_entry(entry, tol=1e-12):
    """Raise TableInvariantError if an entry breaks a stage invariant."""
    where = f"N={entry.order}, M={entry.substeps}, nu index {entry.nu_index}"
    a = entry.stages
    total = complex(math.fsum(a.real), math.fsum(a.imag))
    if abs(total - 1) > tol:
        raise TableInvariantError(f"{where}: stages sum to {total}, not 1")
    upper = np.sort_complex(a[a.imag > 0])
    lower = np.sort_complex(a[a.imag < 0].conj())
    if len(upper) != len(lower) or np.any(np.abs(upper - lower) > tol * np.maximum(1, np.abs(upper))):
        raise TableInvariantError(f"{where}: non-real stages are not closed under conjugation")
    limit = AMPLIFICATION_FACTOR * entry.degree**2
    q = certify_amplification(a, entry.extent)
    if not q < limit:
        raise TableInvariantError(f"{where}: amplification {q:.3g} exceeds {limit}")


def loads_table(text, validate=True):
    lines = text.splitlines()
    if len(lines) < 2:
        raise TableError("table text is truncated")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise TableVersionError("table header is not readable") from exc
    if header.get("format") != FORMAT_NAME:
        raise TableVersionError(f"not a coefficient table (format {header.get('format')!r})")
    if header.get("version") != FORMAT_VERSION:
        raise TableVersionError(f"table version {header.get('version')!r}, expected {FORMAT_VERSION}")
    try:
        trailer = json.loads(lines[-1])
    except json.JSONDecodeError:
        trailer = {}
    if not isinstance(trailer, dict) or "checksum" not in trailer:
        raise TableChecksumError("table has no checksum trailer")
    body = "".join(line + "\n" for line in lines[:-1])
    digest = "sha256:" + hashlib.sha256(body.encode()).hexdigest()
    if trailer["checksum"] != digest:
        raise TableChecksumError("table checksum mismatch")
    table = CoefficientTable(digits=header.get("digits", TABLE_DIGITS))
    for line in lines[1:-1]:
        entry = TableEntry.from_record(json.loads(line))
        if validate:
            validate_entry(entry)
        table.add(entry)
    return table


def load_table(path, validate=True):
    try:
        with _open(path, "r") as fh:
            text = fh.read()
    except (EOFError, gzip.BadGzipFile) as exc:
        raise TableChecksumError(f"{path}: damaged or truncated file ({exc})") from exc
    return loads_table(text, validate)


def table_filename(order):
    return f"rkg_order{order}.jsonl.gz"


def search_path():
    """Directories searched for table files: $RKG_TABLE_PATH, then package data."""
    dirs = [Path(p) for p in os.environ.get(TABLE_PATH_ENV, "").split(os.pathsep) if p]
    return dirs + [DATA_DIR]


def find_table_file(order):
    names = (table_filename(order), table_filename(order)[:-3])
    for directory in search_path():
        for name in names:
            candidate = directory / name
            if candidate.is_file():
                return candidate
    return None


_DEFAULT = CoefficientTable()
_LOADED_ORDERS = set()


def default_table(orders=None, validate=True):
    """Process-wide table, loading per-order files from the search path on demand."""
    for order in orders or SHIPPED_ORDERS:
        if order in _LOADED_ORDERS:
            continue
        path = find_table_file(order)
        if path is None:
            raise FileNotFoundError(
                f"no table file {table_filename(order)} on {TABLE_PATH_ENV} or in the package data"
            )
        _DEFAULT.merge(load_table(path, validate))
        _LOADED_ORDERS.add(order)
    return _DEFAULT


def table_for(order, substeps_max, nu_indices=range(1, NU_GRID_SIZE), validate=True):
    """A table for ``order``: from the search path if present, else generated."""
    path = find_table_file(order)
    if path is not None:
        return default_table([order], validate)
    table = CoefficientTable()
    for i in nu_indices:
        for entry in generate_entries(order, range(1, substeps_max + 1), i):
            table.add(entry)
    return table

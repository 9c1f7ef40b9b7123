"""Reading samples and chains, writing reports.

Samples are plain text, one positive number per line; ``#`` starts a
comment and blank lines are skipped.  Chains are CSV with the columns
``iteration, chain, eta, alpha``.  Reports are JSON wrapped in a small
envelope that records the command, package version, seed and time.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io as _io
import json
import math
import os
import sys
from importlib import resources

import numpy as np

from . import __version__
from .errors import DomainError
from .mcmc import Chain
from .model import Sample

SCHEMA = "ricebayes.report/1"
CHAIN_COLUMNS = ("iteration", "chain", "eta", "alpha")


class InputError(DomainError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def _open_text(source):
    if hasattr(source, "read"):
        return source.read()
    if str(source) == "-":
        return sys.stdin.read()
    with open(source, encoding="utf-8") as fh:
        return fh.read()


def parse_sample(text):
    values = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip().replace("\u2212", "-")
        if not body:
            continue
        try:
            v = float(body)
        except ValueError:
            raise InputError(f"cannot parse {body!r} as a number", lineno) from None
        if not math.isfinite(v):
            raise InputError(f"value {body!r} is not finite", lineno)
        if v <= 0:
            raise InputError(f"value {body!r} is not positive", lineno)
        values.append(v)
    if not values:
        raise InputError("no observations found")
    return Sample(np.array(values))


def load_sample(source="-"):
    """Read a sample from a path, an open text file, or ``"-"`` for stdin."""
    return parse_sample(_open_text(source))


def write_sample(s, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{v!r}\n" for v in s.values.tolist())


def table1_path():
    """Path of the shipped 35-observation received-signal data set."""
    return resources.files("ricebayes") / "data" / "table1.txt"


def load_table1():
    return parse_sample(table1_path().read_text(encoding="utf-8"))


# -- chains -----------------------------------------------------------------------


def chain_to_csv(c):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CHAIN_COLUMNS)
    its = c.iterations()
    for k in range(c.n_chains):
        for it, (eta, alpha) in zip(its, c.draws[k]):
            w.writerow([int(it), k, repr(float(eta)), repr(float(alpha))])
    return buf.getvalue()


def chain_from_csv(text):
    reader = csv.reader(_io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CHAIN_COLUMNS:
        raise InputError(f"chain file must start with the header {','.join(CHAIN_COLUMNS)}", 1)
    per_chain = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise InputError("expected 4 columns", lineno)
        try:
            k, eta, alpha = int(row[1]), float(row[2]), float(row[3])
        except ValueError:
            raise InputError("malformed chain row", lineno) from None
        if not (eta > 0 and alpha > 0 and math.isfinite(eta) and math.isfinite(alpha)):
            raise InputError("chain draws must be positive and finite", lineno)
        per_chain.setdefault(k, []).append((eta, alpha))
    if not per_chain:
        raise InputError("chain file holds no draws")
    lengths = {len(v) for v in per_chain.values()}
    if len(lengths) != 1:
        raise InputError("chains have different lengths")
    draws = np.array([per_chain[k] for k in sorted(per_chain)])
    nan = np.full(draws.shape[0], np.nan)
    return Chain(draws, nan, nan.copy())


def load_chain(source):
    return chain_from_csv(_open_text(source))


# -- reports ----------------------------------------------------------------------


def timestamp():
    """UTC time in ISO format; ``SOURCE_DATE_EPOCH`` pins it for replay."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        when = _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc)
    else:
        when = _dt.datetime.now(tz=_dt.timezone.utc).replace(microsecond=0)
    return when.isoformat().replace("+00:00", "Z")


def envelope(command, payload, seed=None, diagnostics=None):
    out = {
        "schema": SCHEMA,
        "command": command,
        "version": __version__,
        "seed": seed,
        "timestamp": timestamp(),
        "payload": payload,
    }
    if diagnostics is not None:
        out["diagnostics"] = diagnostics
    return out


def _plain(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(report):
    return json.dumps(report, indent=2, default=_plain, allow_nan=True) + "\n"

"""Plain-text file formats for scenarios, chains, datasets and reports.

Scenario and chain files start with a magic comment line, followed by one
``#``-prefixed JSON header line, followed by comma-separated records::

    # popgp-scenario 1
    # {"m_contents": 2, "q_dim": 2, "true_params": [...], "rng_seed": 7}
    x1,x2,lambda
    1.0,0.0,0.25
    0.0,1.0,-0.5

    # popgp-chain 1
    # {"n_contents": 2, "dim": 6, "config": {...}, "meta": {...}}
    s,<dim values>            one line per retained sample
    t,<accepted>,<divergent>,<H>   one line per proposal, burn-in included

Reals are written with ``repr`` so that they round-trip exactly.  Catalog and
request datasets are CSV files with a one-line header (``x1..xQ`` and
``slot1..slotN`` respectively) and one row per content.
"""

import csv
import json
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import ParseError
from .sampler import HmcConfig, PosteriorChain
from .synthetic import SyntheticScenario

SCENARIO_MAGIC = "# popgp-scenario 1"
CHAIN_MAGIC = "# popgp-chain 1"


def _fmt(x):
    return repr(float(x))


def _parse_float(text, line, field):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", line, field) from None
    return value


def _read_header(lines, magic, path):
    if not lines or lines[0].rstrip("\n") != magic:
        raise ParseError(f"{path}: expected first line {magic!r}", 1)
    if len(lines) < 2 or not lines[1].startswith("#"):
        raise ParseError(f"{path}: missing JSON header line", 2)
    try:
        header = json.loads(lines[1][1:])
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON header ({exc.msg})", 2) from None
    if not isinstance(header, dict):
        raise ParseError(f"{path}: JSON header must be an object", 2)
    return header


def _require(header, key, line=2):
    if key not in header:
        raise ParseError(f"header is missing {key!r}", line, key)
    return header[key]


def save_scenario(path, scenario):
    X = scenario.catalog
    M, Q = X.shape
    header = {
        "m_contents": M,
        "q_dim": Q,
        "true_params": [float(t) for t in scenario.true_params],
        "rng_seed": int(scenario.rng_seed),
    }
    with open(path, "w") as fh:
        fh.write(SCENARIO_MAGIC + "\n")
        fh.write("# " + json.dumps(header) + "\n")
        fh.write(",".join([f"x{q + 1}" for q in range(Q)] + ["lambda"]) + "\n")
        for row, lam in zip(X, scenario.true_lambda):
            fh.write(",".join([_fmt(v) for v in row] + [_fmt(lam)]) + "\n")


def load_scenario(path):
    lines = Path(path).read_text().splitlines()
    header = _read_header(lines, SCENARIO_MAGIC, path)
    M = int(_require(header, "m_contents"))
    Q = int(_require(header, "q_dim"))
    theta = np.array(_require(header, "true_params"), dtype=float)
    if theta.size != Q + 2:
        raise ParseError(f"true_params needs {Q + 2} entries, has {theta.size}", 2, "true_params")
    expected = [f"x{q + 1}" for q in range(Q)] + ["lambda"]
    if len(lines) < 3 or lines[2].strip().split(",") != expected:
        raise ParseError(f"column header must be {','.join(expected)}", 3)
    records = [ln for ln in lines[3:] if ln.strip()]
    if len(records) != M:
        raise ParseError(f"expected {M} content rows, found {len(records)}", 4 + len(records))
    X = np.empty((M, Q))
    lam = np.empty(M)
    for i, ln in enumerate(records):
        lineno = 4 + i
        fields = ln.split(",")
        if len(fields) != Q + 1:
            raise ParseError(f"expected {Q + 1} fields, got {len(fields)}", lineno)
        for q in range(Q):
            X[i, q] = _parse_float(fields[q], lineno, expected[q])
        lam[i] = _parse_float(fields[Q], lineno, "lambda")
    return SyntheticScenario(X, theta, lam, np.exp(lam), int(header.get("rng_seed", 0)))


def save_chain(path, chain):
    header = {
        "n_contents": int(chain.n_contents),
        "dim": int(chain.samples.shape[1]),
        "config": asdict(chain.config) if chain.config is not None else None,
        "meta": chain.meta,
    }
    with open(path, "w") as fh:
        fh.write(CHAIN_MAGIC + "\n")
        fh.write("# " + json.dumps(header) + "\n")
        for row in chain.samples:
            fh.write("s," + ",".join(_fmt(v) for v in row) + "\n")
        for acc, div, h in zip(chain.accepted, chain.divergent, chain.hamiltonian_trace):
            fh.write(f"t,{int(acc)},{int(div)},{_fmt(h)}\n")


def load_chain(path):
    lines = Path(path).read_text().splitlines()
    header = _read_header(lines, CHAIN_MAGIC, path)
    n_contents = int(_require(header, "n_contents"))
    dim = int(_require(header, "dim"))
    samples, accepted, divergent, h_trace = [], [], [], []
    for lineno, ln in enumerate(lines[2:], start=3):
        if not ln.strip():
            continue
        fields = ln.split(",")
        kind = fields[0]
        if kind == "s":
            if len(fields) != dim + 1:
                raise ParseError(f"sample record needs {dim} values, has {len(fields) - 1}", lineno)
            samples.append([_parse_float(v, lineno, f"value{k}") for k, v in enumerate(fields[1:])])
        elif kind == "t":
            if len(fields) != 4 or fields[1] not in ("0", "1") or fields[2] not in ("0", "1"):
                raise ParseError("trace record must be t,<0|1>,<0|1>,<H>", lineno)
            accepted.append(fields[1] == "1")
            divergent.append(fields[2] == "1")
            h_trace.append(_parse_float(fields[3], lineno, "hamiltonian"))
        else:
            raise ParseError(f"unknown record kind {kind!r}", lineno, "kind")
    if not samples:
        raise ParseError(f"{path}: no samples")
    cfg = header.get("config")
    return PosteriorChain(
        samples=np.array(samples),
        accepted=np.array(accepted, dtype=bool),
        hamiltonian_trace=np.array(h_trace),
        divergent=np.array(divergent, dtype=bool),
        n_contents=n_contents,
        config=HmcConfig(**cfg) if cfg else None,
        meta=header.get("meta") or {},
    )


def _read_csv_matrix(path, prefix, dtype):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file", 1)
    head = [h.strip() for h in rows[0]]
    expected = [f"{prefix}{k + 1}" for k in range(len(head))]
    if head != expected:
        raise ParseError(f"{path}: header must be {','.join(expected[:3])},...", 1)
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(head):
            raise ParseError(f"{path}: expected {len(head)} fields, got {len(row)}", lineno)
        values = []
        for name, text in zip(head, row):
            v = _parse_float(text, lineno, name)
            if dtype is int:
                if not (math.isfinite(v) and v == int(v) and v >= 0):
                    raise ParseError(f"{path}: counts must be non-negative integers", lineno, name)
                v = int(v)
            values.append(v)
        data.append(values)
    if not data:
        raise ParseError(f"{path}: no data rows", 2)
    return np.array(data, dtype=float if dtype is float else np.int64)


def save_catalog(path, catalog):
    catalog = np.asarray(catalog, dtype=float)
    with open(path, "w") as fh:
        fh.write(",".join(f"x{q + 1}" for q in range(catalog.shape[1])) + "\n")
        for row in catalog:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def load_catalog(path):
    return _read_csv_matrix(path, "x", float)


def save_requests(path, history):
    counts = getattr(history, "counts", history)
    with open(path, "w") as fh:
        fh.write(",".join(f"slot{n + 1}" for n in range(counts.shape[1])) + "\n")
        for row in counts:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def load_requests(path):
    from .model import RequestHistory

    return RequestHistory(_read_csv_matrix(path, "slot", int))


def write_csv(path, columns, rows):
    """Write ``rows`` (sequences aligned with ``columns``) with reals in ``repr`` form."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])

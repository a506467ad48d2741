"""
Data pairs and measurement-count tables.

A :class:`DataPair` is ``(psi, phi, t)``: a prepared state, the observed
output amplitude vector and the evolution time.  Laboratory data arrives as a
:class:`CountTable` (prepared state, per-basis-state counts, shots, time);
:func:`pairs_from_table` turns each row into a pair with
``phi_k = sqrt(counts_k / shots)``.

State labels in files are 1-based, matching "State 1 ... State n".
"""

import csv
import json
import re
from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np

from .linalg import ContractError, expm_unitary

__all__ = [
    "DataValidationError",
    "DataPair",
    "CountRow",
    "CountTable",
    "NOMINAL_EXACT_SHOTS",
    "standard_input_states",
    "table1_input_states",
    "standard_input_labels",
    "table1_input_labels",
    "counts_to_amplitudes",
    "exact_output",
    "exact_pairs",
    "simulate_counts",
    "pairs_from_table",
    "table_to_json",
    "table_from_json",
    "save_table",
    "load_table",
    "read_counts_csv",
    "TABLE1_COUNTS",
    "TABLE1_T",
    "table1",
]

NOMINAL_EXACT_SHOTS = 10**6
NORM_TOL = 1e-9

# Reference hyperfine counts: rows are prepared states 1-4 and the uniform
# superposition; 1024 shots each, evolution time 0.785.
TABLE1_COUNTS = (
    (993, 12, 8, 11),
    (34, 13, 959, 18),
    (17, 982, 14, 11),
    (10, 34, 47, 933),
    (240, 249, 255, 280),
)
TABLE1_T = 0.785


class DataValidationError(ContractError):
    """A count table or data file is inconsistent; ``row`` is 0-based when known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row + 1}: {message}"
        super().__init__(message)
        self.row = row


@dataclass(frozen=True)
class DataPair:
    psi: np.ndarray
    phi: np.ndarray
    t: float

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        phi = np.asarray(self.phi, dtype=complex)
        if psi.ndim != 1 or psi.shape != phi.shape:
            raise ContractError(f"psi/phi shape mismatch: {psi.shape} vs {phi.shape}")
        for name, v in (("psi", psi), ("phi", phi)):
            if abs(np.linalg.norm(v) - 1.0) > NORM_TOL:
                raise ContractError(f"{name} is not normalized (norm {np.linalg.norm(v)!r})")
        if not self.t >= 0:
            raise ContractError(f"evolution time must be >= 0, got {self.t}")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "t", float(self.t))

    @property
    def dim(self):
        return self.psi.shape[0]


@dataclass
class CountRow:
    """
    One prepare-evolve-measure record.

    ``label`` is the file encoding of the prepared state (see
    :func:`table_to_json`).  ``output`` optionally carries the complex output
    amplitudes for exactly simulated rows; when present it is used as ``phi``
    instead of the square-rooted frequencies.
    """

    prepared: np.ndarray
    counts: list
    shots: int
    t: float
    label: dict = field(default_factory=dict)
    output: Optional[np.ndarray] = None


@dataclass
class CountTable:
    dim: int
    rows: list = field(default_factory=list)

    def validate(self):
        for r, row in enumerate(self.rows):
            if len(row.counts) != self.dim:
                raise DataValidationError(
                    f"expected {self.dim} counts, got {len(row.counts)}", row=r
                )
            if any(int(c) != c or c < 0 for c in row.counts):
                raise DataValidationError("counts must be non-negative integers", row=r)
            if row.shots <= 0:
                raise DataValidationError("shots must be positive", row=r)
            if sum(row.counts) != row.shots:
                raise DataValidationError(
                    f"counts sum to {sum(row.counts)} but shots is {row.shots}", row=r
                )
            if not row.t >= 0:
                raise DataValidationError(f"negative time {row.t}", row=r)
            if np.shape(row.prepared) != (self.dim,):
                raise DataValidationError("prepared state has the wrong dimension", row=r)
        return self


def _basis(n, k):
    v = np.zeros(n, dtype=complex)
    v[k] = 1.0
    return v


def _uniform(n):
    return np.full(n, 1.0 / np.sqrt(n), dtype=complex)


def _pair(n, i, j):
    v = np.zeros(n, dtype=complex)
    v[i] = v[j] = 1.0 / np.sqrt(2.0)
    return v


def standard_input_labels(n):
    """File encodings matching :func:`standard_input_states`."""
    labels = [{"kind": "uniform"}]
    labels += [{"kind": "basis", "index": k + 1} for k in range(n)]
    labels += [
        {"kind": "pair", "i": i + 1, "j": j + 1} for i in range(n) for j in range(i + 1, n)
    ]
    return labels


def _state_from_label(label, n):
    kind = label.get("kind")
    if kind == "basis":
        k = int(label["index"]) - 1
        if not 0 <= k < n:
            raise ContractError(f"basis index {k + 1} out of range 1..{n}")
        return _basis(n, k)
    if kind == "uniform":
        return _uniform(n)
    if kind == "pair":
        i, j = int(label["i"]) - 1, int(label["j"]) - 1
        if not (0 <= i < n and 0 <= j < n and i != j):
            raise ContractError(f"bad pair state ({i + 1}, {j + 1}) for dim {n}")
        return _pair(n, i, j)
    if kind == "amplitudes":
        v = np.asarray(label["re"], dtype=float) + 1j * np.asarray(
            label.get("im", [0.0] * len(label["re"])), dtype=float
        )
        if v.shape != (n,):
            raise ContractError(f"amplitude vector has length {v.size}, expected {n}")
        return v / np.linalg.norm(v)
    raise ContractError(f"unknown prepared-state kind {kind!r}")


def _label_for_state(v):
    v = np.asarray(v, dtype=complex)
    return {"kind": "amplitudes", "re": [float(x) for x in v.real], "im": [float(x) for x in v.imag]}


def standard_input_states(n):
    """
    The ``1 + n + C(n, 2)`` input states, in order: the uniform superposition,
    the basis states ``e_1 .. e_n``, then ``(e_i + e_j)/sqrt(2)`` for ``i < j``.

    Returns an array of shape ``(1 + n + C(n, 2), n)``.
    """
    if n < 2:
        raise ContractError("need at least two basis states")
    states = [_state_from_label(lab, n) for lab in standard_input_labels(n)]
    assert len(states) == 1 + n + comb(n, 2)
    return np.array(states)


def table1_input_states(n):
    """Basis states followed by the uniform superposition (reference-table layout)."""
    return np.array([_basis(n, k) for k in range(n)] + [_uniform(n)])


def table1_input_labels(n):
    return [{"kind": "basis", "index": k + 1} for k in range(n)] + [{"kind": "uniform"}]


def counts_to_amplitudes(counts, shots, row=None):
    """``sqrt(counts / shots)``: real, non-negative, unit norm when counts sum to shots."""
    counts = np.asarray(counts)
    if shots <= 0:
        raise DataValidationError("shots must be positive", row=row)
    if np.any(counts < 0):
        raise DataValidationError("negative count", row=row)
    if int(np.sum(counts)) != shots:
        raise DataValidationError(
            f"counts sum to {int(np.sum(counts))} but shots is {shots}", row=row
        )
    return np.sqrt(counts / shots).astype(complex)


def exact_output(H, psi, t):
    """``exp(-i t H) psi``."""
    psi = np.asarray(psi, dtype=complex)
    H = np.asarray(H, dtype=float)
    if H.shape != (psi.size, psi.size):
        raise ContractError(f"dimension mismatch: H {H.shape}, psi {psi.shape}")
    return expm_unitary(H, t) @ psi


def exact_pairs(H, inputs, t):
    """Noise-free data pairs carrying the full complex outputs."""
    U = expm_unitary(np.asarray(H, dtype=float), t)
    return [DataPair(psi, U @ psi, t) for psi in np.asarray(inputs, dtype=complex)]


def _largest_remainder(p, total):
    # integer counts summing to `total`, each within 1 of p * total
    raw = np.asarray(p) * total
    base = np.floor(raw).astype(np.int64)
    short = int(total - base.sum())
    if short > 0:
        order = np.argsort(-(raw - base), kind="stable")
        base[order[:short]] += 1
    return [int(c) for c in base]


def simulate_counts(H, inputs, t, shots=None, seed=None, noise=0.0, labels=None):
    """
    Count table for ``inputs`` evolved under ``H`` for time ``t``.

    Parameters
    ----------
    H : array_like, shape (n, n)
        The black-box true Hamiltonian.
    inputs : array_like, shape (m, n)
        Normalized prepared states.
    shots : int or None
        ``None`` selects exact mode: counts are the exact probabilities
        rounded to :data:`NOMINAL_EXACT_SHOTS` by largest remainder, and each
        row stores the complex output so downstream pairs are noise free.
        Otherwise one multinomial sample of ``shots`` draws per row.
    seed : int or None
        Row ``r`` samples from ``default_rng([seed, r])``, so rows are
        independent of evaluation order.
    noise : float
        Depolarizing weight ``eps``: probabilities become
        ``(1 - eps) p + eps / n`` before sampling.  Sampled mode only.
    labels : list of dict, optional
        File encodings of the prepared states.
    """
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    inputs = np.asarray(inputs, dtype=complex)
    if inputs.ndim != 2 or inputs.shape[1] != n:
        raise ContractError(f"inputs must have shape (m, {n}), got {inputs.shape}")
    if not 0.0 <= noise <= 1.0:
        raise ContractError("noise must lie in [0, 1]")
    if shots is None and noise:
        raise ContractError("depolarizing noise needs a finite shot count")
    if shots is not None and shots <= 0:
        raise ContractError("shots must be positive")
    if labels is None:
        labels = [_label_for_state(v) for v in inputs]
    U = expm_unitary(H, t)
    table = CountTable(n)
    base_seed = 0 if seed is None else int(seed)
    for r, psi in enumerate(inputs):
        out = U @ psi
        p = np.abs(out) ** 2
        p = p / p.sum()
        if shots is None:
            counts = _largest_remainder(p, NOMINAL_EXACT_SHOTS)
            table.rows.append(
                CountRow(psi, counts, NOMINAL_EXACT_SHOTS, float(t), labels[r], output=out)
            )
            continue
        p = (1.0 - noise) * p + noise / n
        rng = np.random.default_rng([base_seed, r])
        counts = [int(c) for c in rng.multinomial(shots, p / p.sum())]
        table.rows.append(CountRow(psi, counts, int(shots), float(t), labels[r]))
    return table


def pairs_from_table(table):
    """One :class:`DataPair` per row; exact rows use their stored output."""
    table.validate()
    pairs = []
    for r, row in enumerate(table.rows):
        if row.output is not None:
            phi = np.asarray(row.output, dtype=complex)
            phi = phi / np.linalg.norm(phi)
        else:
            phi = counts_to_amplitudes(row.counts, row.shots, row=r)
        try:
            pairs.append(DataPair(row.prepared, phi, row.t))
        except ContractError as exc:
            raise DataValidationError(str(exc), row=r) from exc
    return pairs


def table_to_json(table):
    """
    Serialize to the CountTable file schema::

        {"dim": n, "rows": [{"prepared": {...}, "counts": [...],
                             "shots": s, "t": seconds}, ...]}

    ``prepared`` is one of ``{"kind": "basis", "index": k}``,
    ``{"kind": "uniform"}``, ``{"kind": "pair", "i": i, "j": j}`` or
    ``{"kind": "amplitudes", "re": [...], "im": [...]}``.  Exact rows add
    ``"output": {"re": [...], "im": [...]}``.
    """
    rows = []
    for row in table.rows:
        label = row.label or _label_for_state(row.prepared)
        obj = {
            "prepared": label,
            "counts": [int(c) for c in row.counts],
            "shots": int(row.shots),
            "t": float(row.t),
        }
        if row.output is not None:
            out = np.asarray(row.output, dtype=complex)
            obj["output"] = {"re": [float(x) for x in out.real], "im": [float(x) for x in out.imag]}
        rows.append(obj)
    return {"dim": int(table.dim), "rows": rows}


def table_from_json(obj):
    try:
        n = int(obj["dim"])
        raw_rows = obj["rows"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataValidationError(f"bad count table: missing or invalid field {exc}") from exc
    if n < 1:
        raise DataValidationError("field 'dim' must be positive")
    table = CountTable(n)
    for r, raw in enumerate(raw_rows):
        try:
            label = raw["prepared"]
            prepared = _state_from_label(label, n)
            output = None
            if raw.get("output") is not None:
                output = np.asarray(raw["output"]["re"], dtype=float) + 1j * np.asarray(
                    raw["output"]["im"], dtype=float
                )
            row = CountRow(
                prepared,
                [int(c) for c in raw["counts"]],
                int(raw["shots"]),
                float(raw["t"]),
                dict(label),
                output,
            )
        except DataValidationError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise DataValidationError(f"bad field {exc}", row=r) from exc
        table.rows.append(row)
    return table.validate()


def save_table(path, table):
    with open(path, "w") as fh:
        json.dump(table_to_json(table), fh, indent=1)
        fh.write("\n")


def load_table(path):
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataValidationError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return table_from_json(obj)


_LABEL_PATTERNS = (
    (re.compile(r"^\s*(?:state\s*)?(\d+)\s*$", re.I), "basis"),
    (re.compile(r"^\s*uniform(?:\s+superposition)?\s*$", re.I), "uniform"),
    (re.compile(r"^\s*(?:pair\s*)?\(?\s*(\d+)\s*[,\-+ ]\s*(\d+)\s*\)?\s*$", re.I), "pair"),
)


def _parse_state_label(text, n, row):
    for pattern, kind in _LABEL_PATTERNS:
        m = pattern.match(text)
        if not m:
            continue
        if kind == "basis":
            label = {"kind": "basis", "index": int(m.group(1))}
        elif kind == "uniform":
            label = {"kind": "uniform"}
        else:
            label = {"kind": "pair", "i": int(m.group(1)), "j": int(m.group(2))}
        try:
            return label, _state_from_label(label, n)
        except ContractError as exc:
            raise DataValidationError(str(exc), row=row) from exc
    raise DataValidationError(f"unrecognized prepared-state label {text!r}", row=row)


def read_counts_csv(path, t, shots=None):
    """
    Read a count CSV: a header row, then one row per prepared state
    with its label ("State 2", "Uniform Superposition", "Pair 1-3") followed
    by ``n`` count columns.  ``t`` applies to every row; ``shots`` defaults
    to each row's count total and is checked when given.
    """
    with open(path, newline="") as fh:
        records = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    if len(records) < 2:
        raise DataValidationError(f"{path}: no data rows")
    n = len(records[0]) - 1
    if n < 1:
        raise DataValidationError(f"{path}: header needs a label column and count columns")
    table = CountTable(n)
    for r, rec in enumerate(records[1:]):
        if len(rec) != n + 1:
            raise DataValidationError(f"expected {n + 1} columns, got {len(rec)}", row=r)
        label, state = _parse_state_label(rec[0], n, r)
        try:
            counts = [int(c) for c in rec[1:]]
        except ValueError as exc:
            raise DataValidationError(f"non-integer count ({exc})", row=r) from exc
        row_shots = sum(counts) if shots is None else int(shots)
        table.rows.append(CountRow(state, counts, row_shots, float(t), label))
    return table.validate()


def table1(t=TABLE1_T):
    """The hyperfine count table with its five prepared states."""
    table = CountTable(4)
    for label, counts in zip(table1_input_labels(4), TABLE1_COUNTS):
        table.rows.append(CountRow(_state_from_label(label, 4), list(counts), 1024, t, label))
    return table.validate()

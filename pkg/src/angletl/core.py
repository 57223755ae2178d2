"""Shared domain types, validation and CSV/JSON file IO."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np


class AngleTLError(Exception):
    """Base class for every error raised by this package."""

    #: CLI exit status for this error family.
    exit_code = 2


class FormatError(AngleTLError):
    """Malformed file structure (ragged rows, empty file)."""


class ParseError(AngleTLError):
    """A cell could not be parsed as a finite real number."""


class ShapeError(AngleTLError):
    """Array dimensions do not agree."""


class ParameterError(AngleTLError):
    """A tuning or configuration parameter is out of its valid range."""


class PlanError(AngleTLError):
    """Invalid cross-validation plan."""


class RegimeError(AngleTLError):
    """Quantity requested outside the regime where it is defined."""


class DegenerateError(AngleTLError):
    """A direction or normalisation is undefined (zero vector)."""


class NumericalError(AngleTLError):
    """Iterative solver failed to converge."""

    exit_code = 3

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class ConditioningError(NumericalError):
    """Linear system is too ill-conditioned to solve reliably."""


def _finite_matrix(a: Any, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if ndim == 1 and arr.ndim == 2 and 1 in arr.shape:
        arr = arr.reshape(-1)
    if arr.ndim != ndim:
        raise ShapeError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ShapeError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise ParseError(f"{name} contains a non-finite entry at index {tuple(int(i) for i in bad)}")
    return arr


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``X`` (n x p) with response ``Y`` (n,)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = _finite_matrix(self.X, "X", 2)
        Y = _finite_matrix(self.Y, "Y", 1)
        if Y.shape[0] != X.shape[0]:
            raise ShapeError(f"Y has length {Y.shape[0]} but X has {X.shape[0]} rows")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        return Dataset(self.X[rows], self.Y[rows])


@dataclass(frozen=True)
class SourceEstimate:
    """Fitted coefficient vector from an external (source) model."""

    w_hat: np.ndarray
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "w_hat", _finite_matrix(self.w_hat, "w_hat", 1))

    @property
    def p(self) -> int:
        return self.w_hat.shape[0]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.w_hat))


@dataclass(frozen=True)
class FitResult:
    """Estimated target coefficients and the penalty pair that produced them.

    ``eta`` is NaN for the source-rescaling estimator, which has no angle
    penalty; its scale factor is stored in ``diagnostics["scale"]``.
    """

    beta_hat: np.ndarray
    lambda_: float
    eta: float
    objective_value: float
    method: str = "angleTL"
    diagnostics: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = {
            "method": self.method,
            "lambda": self.lambda_,
            "eta": None if math.isnan(self.eta) else self.eta,
            "objective_value": self.objective_value,
            "p": int(self.beta_hat.shape[0]),
        }
        out.update({k: v for k, v in self.diagnostics.items() if np.isscalar(v) or v is None})
        return out


@dataclass(frozen=True)
class SpectralDistribution:
    """Discrete probability measure over covariance eigenvalues."""

    eigenvalues: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        t = _finite_matrix(self.eigenvalues, "eigenvalues", 1)
        w = _finite_matrix(self.weights, "weights", 1)
        if t.shape != w.shape:
            raise ShapeError("eigenvalues and weights must have the same length")
        if np.any(t < 0):
            raise ParameterError("eigenvalues must be nonnegative")
        if np.any(w < 0):
            raise ParameterError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ParameterError(f"weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "eigenvalues", t)
        object.__setattr__(self, "weights", w)

    @classmethod
    def point_mass(cls, value: float = 1.0) -> "SpectralDistribution":
        return cls(np.array([float(value)]), np.array([1.0]))

    @classmethod
    def identity(cls) -> "SpectralDistribution":
        return cls.point_mass(1.0)

    @classmethod
    def uniform_atoms(cls, values) -> "SpectralDistribution":
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        return cls(values, np.full(values.shape, 1.0 / values.size))

    @classmethod
    def from_matrix(cls, sigma: np.ndarray) -> "SpectralDistribution":
        eig = np.clip(np.linalg.eigvalsh(np.asarray(sigma, dtype=np.float64)), 0.0, None)
        return cls.uniform_atoms(eig)

    @property
    def mean(self) -> float:
        """Average eigenvalue, i.e. tr(Sigma)/p."""
        return float(self.weights @ self.eigenvalues)

    @property
    def max(self) -> float:
        return float(self.eigenvalues.max())

    @property
    def min(self) -> float:
        return float(self.eigenvalues.min())

    def to_dict(self) -> dict:
        return {"eigenvalues": self.eigenvalues.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d) -> "SpectralDistribution":
        if isinstance(d, str):
            if d == "identity":
                return cls.identity()
            raise ParameterError(f"unknown spectrum name {d!r}")
        if "eigenvalues" not in d:
            raise ParameterError("spectrum requires 'eigenvalues'")
        t = np.asarray(d["eigenvalues"], dtype=np.float64)
        if "weights" in d:
            return cls(t, np.asarray(d["weights"], dtype=np.float64))
        return cls.uniform_atoms(t)


@dataclass(frozen=True)
class ValidatedBundle:
    data: Dataset
    source: SourceEstimate | None

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def p(self) -> int:
        return self.data.p


def validate_pairing(X, Y, w_hat=None) -> ValidatedBundle:
    """Check that ``X``, ``Y`` and (optionally) ``w_hat`` have compatible shapes.

    Raises
    ------
    ShapeError
        If ``rows(X) != len(Y)`` or ``cols(X) != len(w_hat)``; the message
        names every dimension involved.
    ParseError
        If any entry is NaN or infinite.
    """
    X = _finite_matrix(X, "X", 2)
    Y = _finite_matrix(Y, "Y", 1)
    problems = []
    if Y.shape[0] != X.shape[0]:
        problems.append(f"rows(X)={X.shape[0]} != len(Y)={Y.shape[0]}")
    w = None
    if w_hat is not None:
        w = w_hat.w_hat if isinstance(w_hat, SourceEstimate) else _finite_matrix(w_hat, "w_hat", 1)
        if w.shape[0] != X.shape[1]:
            problems.append(f"cols(X)={X.shape[1]} != len(w_hat)={w.shape[0]}")
    if problems:
        raise ShapeError("dimension mismatch: " + "; ".join(problems))
    label = w_hat.label if isinstance(w_hat, SourceEstimate) else None
    source = None if w is None else SourceEstimate(w, label)
    return ValidatedBundle(Dataset(X, Y), source)


# ---------------------------------------------------------------------------
# CSV IO
# ---------------------------------------------------------------------------

def _parse_rows(text: str, origin: str, has_header: bool) -> np.ndarray:
    reader = csv.reader(io.StringIO(text, newline=""))
    rows = []
    width = None
    for lineno, row in enumerate(reader, start=1):
        if has_header and lineno == 1:
            continue
        if not row or (len(row) == 1 and row[0].strip() == ""):
            # trailing blank lines are tolerated, interior ones are not
            rows.append(None)
            continue
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise FormatError(
                f"{origin}: ragged row at row {lineno}: expected {width} columns, got {len(row)}"
            )
        values = []
        for col, cell in enumerate(row, start=1):
            cell = cell.strip()
            if cell == "":
                raise ParseError(f"{origin}: empty cell at row {lineno}, column {col}")
            try:
                x = float(cell)
            except ValueError:
                raise ParseError(
                    f"{origin}: non-numeric value {cell!r} at row {lineno}, column {col}"
                ) from None
            if not math.isfinite(x):
                raise ParseError(f"{origin}: non-finite value {cell!r} at row {lineno}, column {col}")
            values.append(x)
        rows.append(values)
    while rows and rows[-1] is None:
        rows.pop()
    if any(r is None for r in rows):
        raise FormatError(f"{origin}: blank line inside data")
    if not rows:
        raise FormatError(f"{origin}: no data rows")
    return np.array(rows, dtype=np.float64)


def load_matrix_csv(path, has_header: bool = False) -> np.ndarray:
    """Read a rectangular numeric CSV file into a 2-D float array."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise FormatError(f"{path}: file not found") from None
    return _parse_rows(text, str(path), has_header)


def load_vector_csv(path, has_header: bool = False) -> np.ndarray:
    """Read a single-column CSV file into a 1-D array."""
    m = load_matrix_csv(path, has_header)
    if m.shape[1] != 1:
        raise FormatError(f"{path}: expected a single column, found {m.shape[1]}")
    return m[:, 0]


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


def save_matrix_csv(path, M, header=None) -> None:
    """Write a matrix (or vector, as one column) with 17 significant digits."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    lines = []
    if header is not None:
        lines.append(",".join(header))
    for row in M:
        lines.append(",".join(format_float(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def save_vector_csv(path, v, header=None) -> None:
    save_matrix_csv(path, np.asarray(v, dtype=np.float64).reshape(-1, 1), header)


def write_table_csv(path, columns, rows) -> None:
    """Write dict rows with a fixed column order; floats get 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            out = []
            for c in columns:
                x = row[c]
                if isinstance(x, (float, np.floating)):
                    out.append(format_float(x))
                else:
                    out.append(str(x))
            writer.writerow(out)


def load_json(path) -> Any:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise FormatError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from None


def dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

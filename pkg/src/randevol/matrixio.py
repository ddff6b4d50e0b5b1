"""Plain-text matrix and certificate files.

Matrix format: first line "N M" (rows, columns), then N rows of M
space-separated decimals printed with 17 significant digits, which is enough
to round-trip IEEE doubles exactly.  Vectors are written as N x 1 matrices.

Certificate format (one item per line):
    lambda <value>
    n <N>
    gamma_upper <N(N-1)/2 values, strictly upper triangle, row-major>
    c <N values>
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .multiwalk import HamiltonianCertificate

_FMT = "%.17g"


class MatrixFormatError(ValueError):
    """Malformed matrix or certificate file; message carries the line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


def format_floats(values) -> str:
    return " ".join(_FMT % v for v in np.asarray(values, dtype=float).ravel())


def write_matrix(path, matrix) -> None:
    mat = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = [f"{mat.shape[0]} {mat.shape[1]}"]
    lines += [format_floats(row) for row in mat]
    Path(path).write_text("\n".join(lines) + "\n")


def write_vector(path, vector) -> None:
    write_matrix(path, np.asarray(vector, dtype=float).reshape(-1, 1))


def _content_lines(path) -> list[tuple[int, str]]:
    out = []
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = raw.strip()
        if stripped and not stripped.startswith("#"):
            out.append((line_no, stripped))
    return out


def read_matrix(path) -> np.ndarray:
    lines = _content_lines(path)
    if not lines:
        raise MatrixFormatError(path, 1, "empty matrix file")
    line_no, header = lines[0]
    parts = header.split()
    if len(parts) != 2:
        raise MatrixFormatError(path, line_no, f"expected 'N M' header, got {header!r}")
    try:
        n_rows, n_cols = int(parts[0]), int(parts[1])
    except ValueError:
        raise MatrixFormatError(path, line_no,
                                f"header entries must be integers, got {header!r}")
    if n_rows < 1 or n_cols < 1:
        raise MatrixFormatError(path, line_no, "matrix dimensions must be positive")
    body = lines[1:]
    if len(body) != n_rows:
        raise MatrixFormatError(path, line_no,
                                f"expected {n_rows} data rows, found {len(body)}")
    rows = []
    for line_no, text in body:
        fields = text.split()
        if len(fields) != n_cols:
            raise MatrixFormatError(path, line_no,
                                    f"expected {n_cols} entries, found {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise MatrixFormatError(path, line_no, f"bad number: {exc}")
    return np.array(rows)


def read_vector(path) -> np.ndarray:
    mat = read_matrix(path)
    if 1 not in mat.shape:
        raise MatrixFormatError(path, 1, f"expected a vector, got shape {mat.shape}")
    return mat.ravel()


def write_certificate(path, cert: HamiltonianCertificate) -> None:
    n = cert.n
    upper = [cert.gamma_upper[i, j] for i in range(n) for j in range(i + 1, n)]
    lines = [
        f"lambda {_FMT % cert.lam}",
        f"n {n}",
        "gamma_upper " + (format_floats(upper) if upper else ""),
        "c " + format_floats(cert.c),
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_certificate(path) -> HamiltonianCertificate:
    fields = {}
    for line_no, text in _content_lines(path):
        key, _, rest = text.partition(" ")
        if key in fields:
            raise MatrixFormatError(path, line_no, f"duplicate field {key!r}")
        fields[key] = (line_no, rest.strip())
    for key in ("lambda", "n", "gamma_upper", "c"):
        if key not in fields:
            raise MatrixFormatError(path, 1, f"missing certificate field {key!r}")
    try:
        lam = float(fields["lambda"][1])
        n = int(fields["n"][1])
        upper_vals = [float(v) for v in fields["gamma_upper"][1].split()]
        c = np.array([float(v) for v in fields["c"][1].split()])
    except ValueError as exc:
        raise MatrixFormatError(path, 1, f"bad certificate number: {exc}")
    if c.size != n:
        raise MatrixFormatError(path, fields["c"][0],
                                f"expected {n} coefficients, found {c.size}")
    expected = n * (n - 1) // 2
    if len(upper_vals) != expected:
        raise MatrixFormatError(path, fields["gamma_upper"][0],
                                f"expected {expected} upper entries, found {len(upper_vals)}")
    gamma_upper = np.zeros((n, n))
    pos = 0
    for i in range(n):
        for j in range(i + 1, n):
            gamma_upper[i, j] = upper_vals[pos]
            pos += 1
    return HamiltonianCertificate(gamma_upper, c, lam)

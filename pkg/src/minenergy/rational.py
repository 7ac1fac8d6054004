"""Exact rational dense matrices for small oracle computations.

Entries are `fractions.Fraction` (arbitrary-precision, always in lowest
terms).  Arithmetic is exact; equality is exact equality.  Intended for
matrices of dimension at most a few dozen.
"""

from fractions import Fraction

import numpy as np


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, (float, np.floating)):
        # binary floats are dyadic rationals; the conversion is exact
        return Fraction(float(x))
    raise TypeError(f"cannot represent {x!r} as an exact rational")


class RationalMatrix:
    """Immutable dense matrix over the rationals."""

    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows_of_entries):
        data = tuple(tuple(_to_fraction(x) for x in row) for row in rows_of_entries)
        if data and any(len(r) != len(data[0]) for r in data):
            raise ValueError("ragged rows")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "rows", len(data))
        object.__setattr__(self, "cols", len(data[0]) if data else 0)

    def __setattr__(self, name, value):
        raise AttributeError("RationalMatrix is immutable")

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "RationalMatrix":
        return cls([[0] * cols for _ in range(rows)])

    @classmethod
    def identity(cls, n: int) -> "RationalMatrix":
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)])

    @classmethod
    def diagonal(cls, entries) -> "RationalMatrix":
        entries = list(entries)
        n = len(entries)
        return cls([[entries[i] if i == j else 0 for j in range(n)] for i in range(n)])

    def __getitem__(self, ij) -> Fraction:
        i, j = ij
        return self.data[i][j]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalMatrix):
            return NotImplemented
        return self.data == other.data

    def __hash__(self):
        return hash(self.data)

    def __add__(self, other: "RationalMatrix") -> "RationalMatrix":
        self._check_same_shape(other)
        return RationalMatrix(
            [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(self.data, other.data)]
        )

    def __sub__(self, other: "RationalMatrix") -> "RationalMatrix":
        self._check_same_shape(other)
        return RationalMatrix(
            [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(self.data, other.data)]
        )

    def __matmul__(self, other: "RationalMatrix") -> "RationalMatrix":
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch: {self.shape} @ {other.shape}")
        bt = list(zip(*other.data)) if other.data else []
        return RationalMatrix(
            [[sum(a * b for a, b in zip(row, col)) for col in bt] for row in self.data]
        )

    def scale(self, scalar) -> "RationalMatrix":
        s = _to_fraction(scalar)
        return RationalMatrix([[s * x for x in row] for row in self.data])

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def T(self) -> "RationalMatrix":
        return RationalMatrix(list(zip(*self.data)) if self.data else [])

    def _check_same_shape(self, other):
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch: {self.shape} vs {other.shape}")

    def _check_square(self):
        if self.rows != self.cols:
            raise ValueError("matrix must be square")

    def determinant(self) -> Fraction:
        """Exact determinant via fraction Gaussian elimination."""
        self._check_square()
        n = self.rows
        a = [list(row) for row in self.data]
        det = Fraction(1)
        for k in range(n):
            pivot_row = next((r for r in range(k, n) if a[r][k] != 0), None)
            if pivot_row is None:
                return Fraction(0)
            if pivot_row != k:
                a[k], a[pivot_row] = a[pivot_row], a[k]
                det = -det
            det *= a[k][k]
            inv = Fraction(1) / a[k][k]
            for r in range(k + 1, n):
                if a[r][k] == 0:
                    continue
                factor = a[r][k] * inv
                a[r] = [x - factor * y for x, y in zip(a[r], a[k])]
        return det

    def ldl(self):
        """Exact LDL^T of a symmetric matrix.

        Returns (L, pivots) with unit lower-triangular L and the diagonal
        pivots of D.  Raises ValueError on a zero pivot (so an indefinite
        matrix with an unlucky leading minor is reported, not silently
        mishandled).
        """
        self._check_square()
        if self != self.T:
            raise ValueError("ldl requires a symmetric matrix")
        n = self.rows
        a = [list(row) for row in self.data]
        L = [[Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)]
        pivots = []
        for k in range(n):
            d = a[k][k]
            if d == 0:
                raise ValueError(f"zero pivot at position {k}")
            pivots.append(d)
            for r in range(k + 1, n):
                factor = a[r][k] / d
                L[r][k] = factor
                for c in range(k, n):
                    a[r][c] -= factor * a[k][c]
        return RationalMatrix(L), pivots

    def is_positive_definite(self) -> bool:
        """Exact PD certificate: all LDL^T pivots strictly positive."""
        try:
            _, pivots = self.ldl()
        except ValueError:
            return False
        return all(p > 0 for p in pivots)

    def to_float(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.data], dtype=float)

    def serialize(self):
        """Nested lists of "num/den" strings (JSON-friendly)."""
        return [[f"{x.numerator}/{x.denominator}" for x in row] for row in self.data]

    def __repr__(self):
        return f"RationalMatrix({[[str(x) for x in row] for row in self.data]})"


def hstack(blocks) -> "RationalMatrix":
    blocks = list(blocks)
    rows = blocks[0].rows
    if any(b.rows != rows for b in blocks):
        raise ValueError("row-count mismatch in hstack")
    return RationalMatrix([sum((list(b.data[i]) for b in blocks), []) for i in range(rows)])


def vstack(blocks) -> "RationalMatrix":
    blocks = list(blocks)
    cols = blocks[0].cols
    if any(b.cols != cols for b in blocks):
        raise ValueError("column-count mismatch in vstack")
    return RationalMatrix([row for b in blocks for row in b.data])


def block_diagonal(blocks) -> "RationalMatrix":
    total_r = sum(b.rows for b in blocks)
    total_c = sum(b.cols for b in blocks)
    out = [[Fraction(0)] * total_c for _ in range(total_r)]
    r0 = c0 = 0
    for b in blocks:
        for i in range(b.rows):
            for j in range(b.cols):
                out[r0 + i][c0 + j] = b.data[i][j]
        r0 += b.rows
        c0 += b.cols
    return RationalMatrix(out)

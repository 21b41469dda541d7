"""Symmetric banded matrices with a direct banded LU solve."""

import numpy as np
from scipy.linalg import solve_banded

from .errors import LinearSolveError


class BandedSymMatrix:
    """Symmetric band matrix, upper diagonals only: data[d, i] = A[i, i+d].

    Row d holds the d-th superdiagonal in its leading n-d entries; the
    trailing entries of each row are kept at zero. Instances are treated as
    immutable by the solver (all arithmetic returns new matrices).
    """

    def __init__(self, data: np.ndarray):
        data = np.asarray(data, dtype=float)
        if data.ndim != 2:
            raise ValueError("band storage must be 2-D (bandwidth+1, n)")
        self.data = data

    @classmethod
    def zeros(cls, n: int, bandwidth: int) -> "BandedSymMatrix":
        return cls(np.zeros((bandwidth + 1, n)))

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def bandwidth(self) -> int:
        return self.data.shape[0] - 1

    def copy(self) -> "BandedSymMatrix":
        return BandedSymMatrix(self.data.copy())

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.n
        y = self.data[0] * x
        for d in range(1, self.bandwidth + 1):
            if d >= n:
                break
            band = self.data[d, :n - d]
            y[:n - d] += band * x[d:]
            y[d:] += band * x[:n - d]
        return y

    def __add__(self, other):
        if not isinstance(other, BandedSymMatrix) or other.data.shape != self.data.shape:
            return NotImplemented
        return BandedSymMatrix(self.data + other.data)

    def __sub__(self, other):
        if not isinstance(other, BandedSymMatrix) or other.data.shape != self.data.shape:
            return NotImplemented
        return BandedSymMatrix(self.data - other.data)

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return BandedSymMatrix(self.data * float(c))

    __rmul__ = __mul__

    def to_dense(self) -> np.ndarray:
        n = self.n
        dense = np.zeros((n, n))
        for d in range(self.bandwidth + 1):
            if d >= n:
                break
            diag = self.data[d, :n - d]
            dense += np.diag(diag, d)
            if d > 0:
                dense += np.diag(diag, -d)
        return dense

    def _lu_band(self) -> np.ndarray:
        """Repack into the (2*bw+1, n) diagonal-ordered form of solve_banded."""
        bw, n = self.bandwidth, self.n
        ab = np.zeros((2 * bw + 1, n))
        for d in range(bw + 1):
            if d >= n:
                break
            band = self.data[d, :n - d]
            ab[bw - d, d:] = band
            if d > 0:
                ab[bw + d, :n - d] = band
        return ab

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if not np.all(np.isfinite(self.data)) or not np.all(np.isfinite(rhs)):
            raise LinearSolveError("non-finite entries in banded system")
        bw = min(self.bandwidth, self.n - 1)
        ab = self._lu_band()
        if bw < self.bandwidth:
            ab = ab[self.bandwidth - bw: self.bandwidth + bw + 1]
        try:
            x = solve_banded((bw, bw), ab, rhs, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise LinearSolveError(f"banded factorization failed: {exc}") from exc
        if not np.all(np.isfinite(x)):
            raise LinearSolveError("banded solve produced non-finite values "
                                   "(singular system)")
        return x

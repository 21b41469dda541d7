import numpy as np
import pytest

from plapmem import BandedSymMatrix, LinearSolveError


def random_banded(n, bw, seed=0):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((bw + 1, n))
    for d in range(1, bw + 1):
        data[d, max(n - d, 0):] = 0.0
    data[0] += bw + 2.0    # diagonal dominance keeps it solvable
    return BandedSymMatrix(data)


class TestBandedSymMatrix:
    @pytest.mark.parametrize("n,bw", [(1, 0), (1, 2), (5, 1), (8, 3), (12, 4)])
    def test_matvec_matches_dense(self, n, bw):
        mat = random_banded(n, bw, seed=n + bw)
        rng = np.random.default_rng(42)
        x = rng.standard_normal(n)
        assert np.allclose(mat.matvec(x), mat.to_dense() @ x, atol=1e-13)

    @pytest.mark.parametrize("n,bw", [(1, 1), (6, 1), (9, 2), (15, 4)])
    def test_solve_matches_dense(self, n, bw):
        mat = random_banded(n, bw, seed=3 * n + bw)
        rng = np.random.default_rng(1)
        rhs = rng.standard_normal(n)
        x = mat.solve(rhs)
        assert np.allclose(mat.to_dense() @ x, rhs, atol=1e-11)

    def test_arithmetic(self):
        a = random_banded(6, 2, seed=1)
        b = random_banded(6, 2, seed=2)
        x = np.arange(6.0)
        combo = 2.0 * a + b - 0.5 * b
        expect = 2.0 * a.to_dense() + 0.5 * b.to_dense()
        assert np.allclose(combo.matvec(x), expect @ x)

    def test_dense_is_symmetric(self):
        dense = random_banded(7, 3, seed=9).to_dense()
        assert np.allclose(dense, dense.T)

    def test_singular_raises(self):
        mat = BandedSymMatrix(np.zeros((2, 4)))
        with pytest.raises(LinearSolveError):
            mat.solve(np.ones(4))

    def test_nonfinite_raises(self):
        data = np.ones((1, 3))
        data[0, 1] = np.nan
        with pytest.raises(LinearSolveError):
            BandedSymMatrix(data).solve(np.ones(3))

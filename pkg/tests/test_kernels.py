"""Parity between the compiled kernel extension and the pure-python
fallback.  The compiled tests skip when the extension is not built."""
import numpy as np
import pytest

from dilstruct import _pykernels
from dilstruct import kernels
from dilstruct.spaces.carnot import engel, heisenberg

try:
    from dilstruct import _ckernels
except ImportError:
    _ckernels = None

needs_compiled = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def test_selected_backend_reports():
    assert kernels.BACKEND in ("compiled", "python")


class TestPureKernels:
    def test_heis_mul_against_bch(self, rng):
        g = heisenberg()
        a, b = rng.standard_normal((2, 3))
        np.testing.assert_allclose(
            _pykernels.heis_mul(a, b),
            _pykernels.carnot_mul(a, b, g.bracket, 2),
            atol=1e-14,
        )

    def test_heis_dil_graded(self, rng):
        a = rng.standard_normal(3)
        out = _pykernels.heis_dil(0.5, a)
        np.testing.assert_allclose(out, [0.5 * a[0], 0.5 * a[1], 0.25 * a[2]])

    def test_gh_search_small(self):
        dx = np.array([[0.0, 1.0], [1.0, 0.0]])
        dy = np.array([[0.0, 1.2], [1.2, 0.0]])
        val, masks = _pykernels.gh_search(dx, dy, np.inf)
        assert val == pytest.approx(0.2, abs=1e-15)
        assert masks is not None

    def test_gh_search_size_guard(self):
        big = np.zeros((8, 8))
        with pytest.raises(ValueError):
            _pykernels.gh_search(big, big, np.inf)


@needs_compiled
class TestCompiledParity:
    def test_group_ops_match(self, rng):
        g = engel()
        for _ in range(200):
            a, b = rng.standard_normal((2, 4))
            eps = float(rng.uniform(0.05, 2.0))
            np.testing.assert_allclose(
                _ckernels.carnot_mul(a, b, g.bracket, g.step),
                _pykernels.carnot_mul(a, b, g.bracket, g.step),
                atol=1e-14,
            )
            np.testing.assert_allclose(
                _ckernels.carnot_dil(eps, a, g.deg.astype(np.int64)),
                _pykernels.carnot_dil(eps, a, g.deg.astype(np.int64)),
                atol=1e-14,
            )

    def test_heis_ops_match(self, rng):
        for _ in range(200):
            a, b = rng.standard_normal((2, 3))
            eps = float(rng.uniform(0.05, 2.0))
            np.testing.assert_allclose(_ckernels.heis_mul(a, b), _pykernels.heis_mul(a, b))
            np.testing.assert_allclose(_ckernels.heis_inv(a), _pykernels.heis_inv(a))
            np.testing.assert_allclose(_ckernels.heis_dil(eps, a), _pykernels.heis_dil(eps, a))
            assert _ckernels.heis_gauge(a) == pytest.approx(_pykernels.heis_gauge(a), rel=1e-15)

    def test_gh_search_matches(self, rng):
        for _ in range(30):
            n, m = int(rng.integers(2, 4)), int(rng.integers(2, 5))
            if n * m > 12:
                continue
            px = rng.uniform(0, 1, (n, 2))
            py = rng.uniform(0, 1, (m, 2))
            dx = np.linalg.norm(px[:, None] - px[None], axis=-1)
            dy = np.linalg.norm(py[:, None] - py[None], axis=-1)
            vc, mc = _ckernels.gh_search(dx, dy, np.inf)
            vp, mp = _pykernels.gh_search(dx, dy, np.inf)
            assert vc == pytest.approx(vp, abs=1e-13)
            np.testing.assert_array_equal(np.asarray(mc), np.asarray(mp))

    def test_gh_search_forced_pair(self, rng):
        px = rng.uniform(0, 1, (2, 2))
        py = rng.uniform(0, 1, (3, 2))
        dx = np.linalg.norm(px[:, None] - px[None], axis=-1)
        dy = np.linalg.norm(py[:, None] - py[None], axis=-1)
        for j in range(3):
            vc, _ = _ckernels.gh_search(dx, dy, np.inf, 0, j)
            vp, _ = _pykernels.gh_search(dx, dy, np.inf, 0, j)
            assert vc == pytest.approx(vp, abs=1e-13)


def test_benchmark_script_runs():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "benchmarks/bench_kernels.py", "--repeat", "50"],
        capture_output=True,
        text=True,
        cwd=str(__import__("pathlib").Path(__file__).resolve().parents[1]),
    )
    assert out.returncode == 0, out.stderr
    assert "gh correspondence search" in out.stdout

import numpy as np
import pytest

from zenosim import _kernels_py, kernels

try:
    from zenosim import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


def _sets(seed=0):
    rng = np.random.default_rng(seed)
    for m in (1, 2, 3, 4, 7, 8, 20, 21):
        v = rng.normal(size=(m, 33))
        v[:, :4] = np.round(v[:, :4])  # repeated values
        yield v


def test_backend_is_reported():
    assert kernels.BACKEND in ("compiled", "python")


@needs_ext
def test_mean_and_median_match_bitwise():
    for v in _sets():
        rows = np.arange(v.shape[0], dtype=np.intp)
        assert np.array_equal(compiled.mean_rows(v, rows), _kernels_py.mean_rows(v, rows))
        assert np.array_equal(compiled.coordinate_median(v), _kernels_py.coordinate_median(v))


@needs_ext
def test_distances_and_norms_agree():
    for v in _sets(1):
        np.testing.assert_allclose(compiled.pairwise_sq_dists(v), _kernels_py.pairwise_sq_dists(v), rtol=1e-13)
        np.testing.assert_allclose(compiled.sq_norms(v), _kernels_py.sq_norms(v), rtol=1e-13)
        if v.shape[0] >= 3:
            d = compiled.pairwise_sq_dists(v)
            k = v.shape[0] - 2
            np.testing.assert_allclose(compiled.krum_scores(d, k), _kernels_py.krum_scores(d, k), rtol=1e-13)


@pytest.mark.parametrize("impl", [_kernels_py] + ([compiled] if compiled else []))
def test_kernel_contracts(impl):
    v = np.array([[1.0, 5.0], [2.0, 4.0], [3.0, 6.0]])
    np.testing.assert_array_equal(impl.coordinate_median(v), [2.0, 5.0])
    np.testing.assert_array_equal(impl.mean_rows(v, np.array([2, 0], dtype=np.intp)), [2.0, 5.5])
    d = impl.pairwise_sq_dists(v)
    assert d[0, 1] == 2.0 and d[1, 0] == 2.0 and d[2, 2] == 0.0
    np.testing.assert_array_equal(impl.krum_scores(d, 1), [2.0, 2.0, 5.0])
    np.testing.assert_array_equal(impl.sq_norms(v), [26.0, 20.0, 45.0])
    with pytest.raises(ValueError):
        impl.mean_rows(v, np.array([], dtype=np.intp))
    with pytest.raises(ValueError):
        impl.krum_scores(d, 3)

"""Bit parity between the compiled stencil kernels and the numpy twins."""

import numpy as np
import pytest

from magvisco.kernels import (
    D_ONESIDED, D_PERIODIC, D_REFLECT, L_PERIODIC, L_PIN, L_REFLECT,
    _stencils_np, backend_name,
)

try:
    from magvisco.kernels import _stencils_cy
except ImportError:
    _stencils_cy = None

needs_ext = pytest.mark.skipif(_stencils_cy is None,
                               reason="compiled extension not built")


def _cases():
    rng = np.random.default_rng(42)
    for shape in [(9, 13), (8, 8), (6, 7, 9)]:
        yield rng.standard_normal(shape), rng.uniform(0.5, 3.0, len(shape))


@needs_ext
def test_dcent_bit_parity():
    for f, h in _cases():
        for axis in range(f.ndim):
            for bc in (D_ONESIDED, D_REFLECT, D_PERIODIC):
                a = _stencils_np.dcent(f, axis, h[axis], bc)
                b = _stencils_cy.dcent(f, axis, h[axis], bc)
                assert a.tobytes() == b.tobytes(), (f.shape, axis, bc)


@needs_ext
def test_lap_bit_parity():
    for f, h in _cases():
        hinv2 = tuple(v * v for v in h)
        for bc in (L_PIN, L_REFLECT, L_PERIODIC):
            a = _stencils_np.lap(f, hinv2, bc)
            b = _stencils_cy.lap(f, hinv2, bc)
            assert a.tobytes() == b.tobytes(), (f.shape, bc)


@needs_ext
def test_noncontiguous_input_matches():
    rng = np.random.default_rng(3)
    base = rng.standard_normal((12, 12))
    view = base[::2, ::2]  # strided view
    a = _stencils_np.dcent(view, 0, 2.0, D_ONESIDED)
    b = _stencils_cy.dcent(view, 0, 2.0, D_ONESIDED)
    assert a.tobytes() == b.tobytes()


def test_backend_reported():
    assert backend_name() in ("cython", "numpy")


def test_dcent_exact_on_linear():
    # centered + one-sided closures differentiate degree-2 exactly
    x = np.linspace(0.0, 1.0, 9)[:, None] * np.ones((1, 9))
    d = _stencils_np.dcent(x * x, 0, 8.0, D_ONESIDED)
    assert np.allclose(d, 2.0 * x, atol=1e-12)


def test_lap_closures():
    # pinned closure zeroes boundary rows
    f = np.arange(81.0).reshape(9, 9)
    out = _stencils_np.lap(f, (1.0, 1.0), L_PIN)
    assert np.all(out[0] == 0) and np.all(out[:, -1] == 0)
    # reflected closure kills the normal second difference of a constant
    out = _stencils_np.lap(np.ones((9, 9)), (1.0, 1.0), L_REFLECT)
    assert np.all(out == 0.0)
    with pytest.raises(ValueError):
        _stencils_np.dcent(f, 0, 1.0, 9)

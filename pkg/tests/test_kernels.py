import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnnresample import kernels
from cnnresample.kernels import (
    BILINEAR,
    BSPLINE,
    CUBIC,
    KD16,
    NN,
    Boundary,
    Kernel,
    KernelSpec,
    boundary_index,
    resample,
    sample,
    sample_points,
    weight,
    weights_1d,
)
from cnnresample.raster import GridTransform, Raster

from conftest import mirror

ALL = [NN, BILINEAR, CUBIC, KD16, BSPLINE]
INTERPOLATING = [NN, BILINEAR, CUBIC, KD16]


def keys_closed_form(t, a=-0.5):
    # Keys' piecewise cubic, written out term by term
    t = abs(t)
    if t <= 1:
        return (a + 2) * t ** 3 - (a + 3) * t ** 2 + 1
    if t < 2:
        return a * t ** 3 - 5 * a * t ** 2 + 8 * a * t - 4 * a
    return 0.0


def clamp(i, n):
    return min(max(i, 0), n - 1)


def brute_force_sample(img, x, y, spec, bound=mirror):
    """Direct 2D convolution with the normalized outer-product kernel."""
    h, w = img.shape
    if spec.tag is Kernel.NEAREST:
        fx, fy = x - math.floor(x), y - math.floor(y)
        j = math.floor(x) + (1 if fx > 0.5 else 0)
        i = math.floor(y) + (1 if fy > 0.5 else 0)
        return img[bound(i, h), bound(j, w)]
    reach = int(spec.support) + 1
    cols = range(math.floor(x) - reach, math.floor(x) + reach + 1)
    rows = range(math.floor(y) - reach, math.floor(y) + reach + 1)
    wx = {j: float(weight(spec, x - j)) for j in cols}
    wy = {i: float(weight(spec, y - i)) for i in rows}
    sx, sy = sum(wx.values()), sum(wy.values())
    total = 0.0
    for i in rows:
        for j in cols:
            total += wy[i] * wx[j] * img[bound(i, h), bound(j, w)]
    return total / (sx * sy)


class TestWeight:
    def test_bilinear_midpoint(self):
        assert weight(BILINEAR, 0.5) == 0.5

    def test_cubic_convolution_values(self):
        # hand evaluation: 1.5*0.125 - 2.5*0.25 + 1 and -0.5*(3.375 - 11.25 + 12 - 4)
        assert weight(CUBIC, 0.5) == pytest.approx(0.5625, abs=1e-15)
        assert weight(CUBIC, 1.5) == pytest.approx(-0.0625, abs=1e-15)
        for t in np.linspace(-2.5, 2.5, 101):
            assert weight(CUBIC, t) == pytest.approx(keys_closed_form(t), abs=1e-14)

    def test_cubic_convolution_other_shape(self):
        spec = KernelSpec(Kernel.CUBIC_CONVOLUTION, a=-0.75)
        for t in (0.25, 0.9, 1.3, 1.99):
            assert weight(spec, t) == pytest.approx(keys_closed_form(t, -0.75), abs=1e-14)

    def test_kaiser_sinc_zeros(self):
        assert weight(KD16, 0.0) == 1.0
        for n in range(1, 8):
            assert weight(KD16, n) == 0.0
            assert weight(KD16, -n) == 0.0

    def test_bspline_values(self):
        assert weight(BSPLINE, 0.0) == pytest.approx(2 / 3)
        assert weight(BSPLINE, 1.0) == pytest.approx(1 / 6)
        assert weight(BSPLINE, 2.0) == 0.0

    def test_nearest_window(self):
        assert weight(NN, 0.49) == 1.0
        assert weight(NN, 0.5) == 0.0
        assert weight(NN, -0.5) == 0.0

    @pytest.mark.parametrize("spec", ALL, ids=lambda s: s.name)
    def test_symmetry(self, spec):
        t = np.linspace(-9, 9, 3601)
        assert np.array_equal(weight(spec, t), weight(spec, -t))

    @pytest.mark.parametrize("spec", ALL, ids=lambda s: s.name)
    def test_compact_support(self, spec):
        t = np.concatenate([np.linspace(spec.support, 20, 500), [spec.support]])
        assert np.all(weight(spec, t) == 0.0)
        assert np.all(weight(spec, -t) == 0.0)

    def test_support_radii(self):
        assert [s.support for s in ALL] == [0.5, 1, 2, 8, 2]

    @pytest.mark.parametrize("kw", [dict(a=0.0), dict(a=-1.5)])
    def test_bad_cubic_parameter(self, kw):
        with pytest.raises(ValueError):
            KernelSpec(Kernel.CUBIC_CONVOLUTION, **kw)

    def test_bad_beta(self):
        with pytest.raises(ValueError):
            KernelSpec(Kernel.KAISER_SINC16, beta=0.0)


class TestWeights1d:
    def test_bilinear(self):
        start, taps = weights_1d(BILINEAR, 0.25)
        assert start == 0
        np.testing.assert_allclose(taps, [0.75, 0.25], atol=1e-15)

    def test_cubic_at_sample(self):
        start, taps = weights_1d(CUBIC, 0.0)
        assert start == -1
        assert list(taps) == [0.0, 1.0, 0.0, 0.0]

    def test_kd16_half_phase(self):
        start, taps = weights_1d(KD16, 0.5)
        assert start == -7 and len(taps) == 16
        assert abs(taps.sum() - 1.0) <= 1e-12

    def test_nearest_ties_go_low(self):
        assert weights_1d(NN, 0.5) == (0, pytest.approx([1.0]))
        assert weights_1d(NN, 0.51)[0] == 1
        assert weights_1d(NN, 0.49)[0] == 0

    @pytest.mark.parametrize("spec", ALL, ids=lambda s: s.name)
    def test_partition_of_unity(self, spec):
        phases = np.arange(1000) / 1000
        _, taps = weights_1d(spec, phases)
        assert taps.shape == (1000, spec.taps)
        assert np.max(np.abs(taps.sum(axis=1) - 1.0)) <= 1e-12


class TestBoundary:
    def test_mirror(self):
        idx = boundary_index(np.arange(-6, 10), 4)
        assert list(idx) == [mirror(i, 4) for i in range(-6, 10)]
        assert boundary_index(np.array([-1]), 5)[0] == 1

    def test_clamp(self):
        assert list(boundary_index(np.array([-3, 0, 4, 9]), 5, Boundary.CLAMP)) == [0, 0, 4, 4]

    def test_single_pixel_axis(self):
        assert list(boundary_index(np.array([-2, 0, 3]), 1)) == [0, 0, 0]


class TestSample:
    @pytest.mark.parametrize("spec", ALL, ids=lambda s: s.name)
    def test_constant(self, spec, rng):
        r = Raster.full(9, 7, 0.37)
        xs, ys = rng.uniform(-5, 14, 50), rng.uniform(-5, 12, 50)
        np.testing.assert_allclose(sample_points(r, xs, ys, spec), 0.37, atol=1e-12)

    def test_bilinear_ramp(self):
        r = Raster(np.tile(np.arange(8.0), (4, 1)))
        assert sample(r, 2.3, 1.0, BILINEAR) == pytest.approx(2.3, abs=1e-14)

    def test_cubic_impulse(self):
        row = np.zeros((1, 12))
        row[0, 5] = 1.0
        # sample 1.5 px from the impulse; taps (-1/16, 9/16, 9/16, -1/16) sum to 1
        assert sample(Raster(row), 6.5, 0.0, CUBIC) == pytest.approx(-0.0625, abs=1e-15)

    @pytest.mark.parametrize("spec", INTERPOLATING, ids=lambda s: s.name)
    def test_interpolation_exactness(self, spec, rng):
        img = rng.random((24, 24))
        s = int(math.ceil(spec.support))
        ys, xs = np.mgrid[s:24 - s, s:24 - s]
        out = sample_points(img, xs.astype(float), ys.astype(float), spec)
        assert np.max(np.abs(out - img[s:24 - s, s:24 - s])) <= 1e-9

    def test_bspline_is_not_interpolating(self, rng):
        img = rng.random((8, 8))
        assert abs(sample(Raster(img), 4.0, 4.0, BSPLINE) - img[4, 4]) > 1e-6

    @pytest.mark.parametrize("spec", ALL, ids=lambda s: s.name)
    @pytest.mark.parametrize("bp", [Boundary.MIRROR, Boundary.CLAMP])
    def test_separable_matches_brute_force(self, spec, bp, rng):
        img = rng.random((16, 16))
        bound = clamp if bp is Boundary.CLAMP else mirror
        xs, ys = rng.uniform(-3, 19, 40), rng.uniform(-3, 19, 40)
        got = sample_points(img, xs, ys, spec, bp)
        want = [brute_force_sample(img, x, y, spec, bound) for x, y in zip(xs, ys)]
        assert np.max(np.abs(got - np.array(want))) <= 1e-9

    def test_non_finite_coordinate(self):
        with pytest.raises(ValueError):
            sample(Raster(np.zeros((3, 3))), float("nan"), 0.0, CUBIC)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-30, 30), st.floats(-30, 30), st.floats(-1, 1), st.floats(-1, 1),
           st.floats(-20, 20))
    def test_linear_reproduction(self, x, y, gx, gy, c0):
        # affine intensity surfaces are reproduced by BL and CC away from borders
        yy, xx = np.mgrid[0:40, 0:40].astype(float)
        img = Raster(gx * xx + gy * yy + c0)
        px, py = 8 + (x + 30) / 60 * 23, 8 + (y + 30) / 60 * 23
        for spec in (BILINEAR, CUBIC):
            assert sample(img, px, py, spec) == pytest.approx(gx * px + gy * py + c0, abs=1e-9)


class TestResample:
    def test_identity_cubic_bit_exact(self, rng):
        r = Raster(rng.random((13, 11)))
        out = resample(r, GridTransform.identity(), 11, 13, CUBIC)
        assert out == r

    @pytest.mark.parametrize("spec", INTERPOLATING, ids=lambda s: s.name)
    def test_identity_all_interpolating(self, spec, rng):
        r = Raster(rng.random((10, 12)))
        assert np.max(np.abs(resample(r, GridTransform(), 12, 10, spec).pixels - r.pixels)) <= 1e-6

    def test_translation_of_ramp(self):
        r = Raster(np.tile(np.arange(10.0), (5, 1)))
        out = resample(r, GridTransform(1, 0, 1, 0, 1, 0), 10, 5, BILINEAR).pixels
        assert np.array_equal(out[:, :-1], r.pixels[:, 1:])

    def test_singular_transform(self):
        with pytest.raises(ValueError, match="non-invertible"):
            resample(Raster(np.zeros((4, 4))), GridTransform(0, 0, 0, 0, 1, 0), 4, 4, CUBIC)

    def test_downsample_dims(self, rng):
        out = resample(Raster(rng.random((16, 16))), GridTransform.scale(2), 8, 8, KD16)
        assert out.shape == (8, 8)

    def test_clamp_vs_mirror_differ_at_edges(self):
        img = Raster(np.tile(np.arange(6.0), (3, 1)))
        m = resample(img, GridTransform(1, 0, -0.5, 0, 1, 0), 6, 3, CUBIC, Boundary.MIRROR)
        c = resample(img, GridTransform(1, 0, -0.5, 0, 1, 0), 6, 3, CUBIC, Boundary.CLAMP)
        assert m.pixels[0, 0] != c.pixels[0, 0]


def test_bspline_prefilter_interpolates(rng):
    img = rng.random((9, 14))
    coeffs = kernels.bspline_prefilter(img)
    ys, xs = np.mgrid[0:9, 0:14].astype(float)
    back = sample_points(coeffs, xs, ys, BSPLINE)
    assert np.max(np.abs(back - img)) <= 1e-9

import numpy as np
import pytest

from fomo import (
    DenseFlow,
    DimensionMismatchError,
    FeatureMap,
    OcclusionMap,
    Point2,
    PyramidSpecError,
    RasterImage,
    backwarp,
    bilinear_sample,
    coordinate_grid,
    load_png,
    pixel_centers,
    pyramid,
    pyramid_l1,
    save_png,
)


def random_image(rng, h=16, w=16, c=3) -> RasterImage:
    return RasterImage(rng.random((h, w, c)))


class TestBilinearSample:
    def test_exact_pixel_center(self):
        rng = np.random.default_rng(0)
        img = random_image(rng)
        xs, ys = pixel_centers(16), pixel_centers(16)
        for j, i in [(0, 0), (5, 11), (15, 15), (7, 3)]:
            got = bilinear_sample(img, Point2(xs[i], ys[j]))
            assert np.array_equal(got, img.data[j, i])

    def test_midpoint_of_adjacent_centers(self):
        rng = np.random.default_rng(1)
        img = random_image(rng)
        xs, ys = pixel_centers(16), pixel_centers(16)
        mid = Point2((xs[4] + xs[5]) / 2, ys[9])
        got = bilinear_sample(img, mid)
        expected = (img.data[9, 4] + img.data[9, 5]) / 2
        assert np.abs(got - expected).max() < 1e-15

    def test_convexity_bound(self):
        # Oracle: any bilinear blend lies inside the neighbor value range.
        rng = np.random.default_rng(2)
        img = random_image(rng)
        for _ in range(200):
            p = rng.uniform(-0.99, 0.99, 2)
            u = (p[0] + 1) * 8 - 0.5
            v = (p[1] + 1) * 8 - 0.5
            i0, j0 = int(np.floor(u)), int(np.floor(v))
            neigh = [
                img.data[j, i] if 0 <= j < 16 and 0 <= i < 16 else np.zeros(3)
                for j in (j0, j0 + 1)
                for i in (i0, i0 + 1)
            ]
            got = bilinear_sample(img, Point2(*p))
            lo = np.min(neigh, axis=0) - 1e-12
            hi = np.max(neigh, axis=0) + 1e-12
            assert ((got >= lo) & (got <= hi)).all()

    def test_far_outside_canvas_is_zero(self):
        rng = np.random.default_rng(3)
        img = random_image(rng)
        assert np.array_equal(bilinear_sample(img, Point2(1.8, -1.9)), np.zeros(3))


class TestBackwarp:
    def test_identity_flow_unit_occlusion_bit_exact(self):
        rng = np.random.default_rng(4)
        img = random_image(rng, 32, 32)
        out = backwarp(img, DenseFlow.identity(32, 32), OcclusionMap.ones(32, 32))
        assert np.array_equal(out.data, img.data)

    def test_zero_occlusion_annihilates(self):
        rng = np.random.default_rng(5)
        img = random_image(rng)
        occ = OcclusionMap(np.zeros((16, 16)))
        out = backwarp(img, DenseFlow.identity(16, 16), occ)
        assert np.array_equal(out.data, np.zeros((16, 16, 3)))

    def test_shift_gather(self):
        # flow sends pixel (i, j) to pixel (i-1, j): column shift, zero edge.
        rng = np.random.default_rng(6)
        img = random_image(rng)
        grid = coordinate_grid(16, 16)
        flow = grid.copy()
        flow[..., 0] -= 2.0 / 16.0
        out = backwarp(img, DenseFlow(flow), OcclusionMap.ones(16, 16))
        assert np.abs(out.data[:, 1:] - img.data[:, :-1]).max() < 1e-12
        assert np.abs(out.data[:, 0]).max() < 1e-12

    def test_linearity(self):
        rng = np.random.default_rng(7)
        f1 = FeatureMap(rng.normal(size=(16, 16, 2)))
        f2 = FeatureMap(rng.normal(size=(16, 16, 2)))
        flow = DenseFlow(coordinate_grid(16, 16) + rng.uniform(-0.2, 0.2, (16, 16, 2)))
        occ = OcclusionMap(rng.random((16, 16)))
        alpha, beta = 0.7, -1.3
        mix = FeatureMap(alpha * f1.data + beta * f2.data)
        left = backwarp(mix, flow, occ).data
        right = alpha * backwarp(f1, flow, occ).data + beta * backwarp(f2, flow, occ).data
        assert np.abs(left - right).max() < 1e-10

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(8)
        img = random_image(rng)
        with pytest.raises(DimensionMismatchError):
            backwarp(img, DenseFlow.identity(8, 8), OcclusionMap.ones(16, 16))
        with pytest.raises(DimensionMismatchError):
            backwarp(img, DenseFlow.identity(16, 16), OcclusionMap.ones(8, 8))


def box_filter_oracle(data: np.ndarray) -> np.ndarray:
    """Independent 2x2 box average: plain loops, no reshape tricks."""
    h, w, c = data.shape
    out = np.zeros((h // 2, w // 2, c))
    for j in range(h // 2):
        for i in range(w // 2):
            block = data[2 * j : 2 * j + 2, 2 * i : 2 * i + 2]
            out[j, i] = block.sum(axis=(0, 1)) / 4.0
    return out


class TestPyramid:
    def test_constant_image(self):
        img = RasterImage(np.full((64, 64, 1), 0.37))
        for level in pyramid(img, [64, 32, 16]):
            assert np.abs(level.data - 0.37).max() < 1e-15

    def test_checkerboard_collapses_to_half(self):
        img = RasterImage(np.array([[0.0, 1.0], [1.0, 0.0]])[..., None])
        levels = pyramid(img, [2, 1])
        assert levels[1].data.shape == (1, 1, 1)
        assert levels[1].data[0, 0, 0] == 0.5

    def test_ramp_golden_levels(self):
        # Ramp pixel (i, j) = i/(W-1); box filtering preserves the mean, so
        # every level sums to 0.5 * pixel count. Frozen from that analysis.
        w = 256
        img = RasterImage(np.broadcast_to(np.arange(w) / (w - 1.0), (w, w))[..., None])
        levels = pyramid(img, [256, 128, 64, 32])
        golden_sums = [32768.0, 8192.0, 2048.0, 512.0]
        for level, gold in zip(levels, golden_sums):
            assert abs(level.data.sum() - gold) < 1e-8

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(9)
        img = RasterImage(rng.random((32, 32, 2)))
        levels = pyramid(img, [32, 16, 8])
        expect = img.data
        for level in levels[1:]:
            expect = box_filter_oracle(expect)
            assert np.abs(level.data - expect).max() < 1e-15

    def test_bad_specs(self):
        img = RasterImage(np.zeros((16, 16, 1)))
        with pytest.raises(PyramidSpecError):
            pyramid(img, [32, 16])  # first level mismatch
        with pytest.raises(PyramidSpecError):
            pyramid(img, [16, 4])  # skips a halving
        with pytest.raises(PyramidSpecError):
            pyramid(img, [])


class TestPyramidL1:
    def test_identical_images_zero(self):
        rng = np.random.default_rng(10)
        img = RasterImage(rng.random((32, 32, 3)))
        per_level, total = pyramid_l1(img, img, [32, 16, 8])
        assert per_level == [0.0, 0.0, 0.0] and total == 0.0

    def test_constant_offset(self):
        rng = np.random.default_rng(11)
        a = RasterImage(rng.random((32, 32, 1)) * 0.8)
        b = RasterImage(a.data + 0.1)
        per_level, total = pyramid_l1(a, b, [32, 16, 8])
        for d in per_level:
            assert abs(d - 0.1) < 1e-12
        assert abs(total - 0.3) < 1e-12

    def test_level0_is_brute_force_mean(self):
        rng = np.random.default_rng(12)
        a = RasterImage(rng.random((16, 16, 3)))
        b = RasterImage(rng.random((16, 16, 3)))
        per_level, _ = pyramid_l1(a, b, [16, 8])
        brute = sum(
            abs(float(a.data[j, i, c]) - float(b.data[j, i, c]))
            for j in range(16)
            for i in range(16)
            for c in range(3)
        ) / (16 * 16 * 3)
        assert abs(per_level[0] - brute) < 1e-12

    def test_symmetry_and_triangle(self):
        rng = np.random.default_rng(13)
        imgs = [RasterImage(rng.random((16, 16, 1))) for _ in range(3)]
        lv = [16, 8]
        dab = pyramid_l1(imgs[0], imgs[1], lv)[1]
        dba = pyramid_l1(imgs[1], imgs[0], lv)[1]
        assert abs(dab - dba) < 1e-15
        dac = pyramid_l1(imgs[0], imgs[2], lv)[1]
        dcb = pyramid_l1(imgs[2], imgs[1], lv)[1]
        assert dab <= dac + dcb + 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            pyramid_l1(
                RasterImage(np.zeros((16, 16, 1))),
                RasterImage(np.zeros((16, 16, 3))),
                [16, 8],
            )


class TestPngRoundTrip:
    def test_quantization_round_trip(self, tmp_path):
        rng = np.random.default_rng(14)
        raw = rng.integers(0, 256, (20, 24, 3), dtype=np.uint8)
        img = RasterImage(raw / 255.0)
        path = tmp_path / "img.png"
        save_png(img, path)
        back = load_png(path)
        assert np.array_equal(np.floor(back.data * 255 + 0.5), raw)

    def test_grayscale(self, tmp_path):
        img = RasterImage(np.linspace(0, 1, 64).reshape(8, 8, 1))
        path = tmp_path / "g.png"
        save_png(img, path)
        back = load_png(path)
        assert back.channels == 1
        assert np.abs(back.data - img.data).max() <= 0.5 / 255


class TestValidation:
    def test_raster_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            RasterImage(np.full((4, 4, 1), 1.5))

    def test_raster_rejects_too_many_channels(self):
        with pytest.raises(ValueError):
            RasterImage(np.zeros((4, 4, 5)))

    def test_feature_map_allows_any_finite(self):
        fm = FeatureMap(np.full((4, 4, 6), -3.7))
        assert fm.channels == 6

    def test_feature_map_rejects_nan(self):
        with pytest.raises(ValueError):
            FeatureMap(np.full((4, 4, 1), np.nan))

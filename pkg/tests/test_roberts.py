from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from stochedge.bitstream import EntropySource, FlipSpec
from stochedge.logic import hold_select
from stochedge.roberts import (
    DetectorConfig,
    as_gray_image,
    binary_reference_with_flips,
    corrupt_binary,
    gradient_to_image,
    normalize,
    reference_roberts,
    stochastic_roberts,
    stochastic_roberts_streams,
)
from stochedge.testimage import bundled_frame, render_frame


def loop_roberts(img):
    """Direct transcription of the window formula, one pixel at a time."""
    h, w = len(img), len(img[0])
    out = np.zeros((h - 1, w - 1))
    for r in range(h - 1):
        for c in range(w - 1):
            p = lambda y, x: img[y][x] / 255.0  # noqa: E731
            out[r, c] = 0.5 * (abs(p(r, c) - p(r + 1, c + 1)) + abs(p(r, c + 1) - p(r + 1, c)))
    return out


@pytest.fixture(scope="module")
def small_image():
    return render_frame(96)[30:46, 30:46]


class TestImageValidation:
    def test_accepts_lists(self):
        assert as_gray_image([[0, 255], [1, 2]]).dtype == np.uint8

    @pytest.mark.parametrize("bad", [[[0, 256]], [[-1, 0]], [[0.5, 1]], np.zeros((2, 2, 3))])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            as_gray_image(bad)

    def test_normalize(self):
        p = normalize([[255, 0, 128]])
        assert p[0, 0] == 1.0 and p[0, 1] == 0.0 and p[0, 2] == 128 / 255
        assert p[0, 2] == pytest.approx(0.50196, abs=1e-5)


class TestReference:
    def test_constant(self):
        assert not reference_roberts(np.full((5, 7), 77)).any()

    def test_single_bright_corner(self):
        assert reference_roberts([[255, 0], [0, 0]]).tolist() == [[0.5]]

    def test_diagonal_constancy(self):
        assert reference_roberts([[255, 0], [0, 255]]).tolist() == [[0.0]]

    def test_matches_loop(self):
        img = np.random.default_rng(0).integers(0, 256, (9, 13))
        np.testing.assert_allclose(reference_roberts(img), loop_roberts(img.tolist()), atol=1e-15)

    @pytest.mark.parametrize("shape", [(1, 5), (5, 1), (1, 1)])
    def test_undersized(self, shape):
        with pytest.raises(ValueError):
            reference_roberts(np.zeros(shape))

    def test_shape(self):
        assert reference_roberts(np.zeros((6, 9))).shape == (5, 8)


class TestGradientToImage:
    def test_values(self):
        assert gradient_to_image([0.0, 1.0, 0.5]).tolist() == [0, 255, 128]

    def test_clamps(self):
        assert gradient_to_image([-0.2, 1.3]).tolist() == [0, 255]

    def test_rounds_half_up(self):
        assert gradient_to_image([1.5 / 255, 2.5 / 255]).tolist() == [2, 3]


class TestBinaryBaseline:
    def test_zero_rate_identity(self):
        img = render_frame(32)
        np.testing.assert_array_equal(binary_reference_with_flips(img, 0.0, EntropySource(1)), reference_roberts(img))

    def test_msb_flip_weight(self):
        img = np.array([[10, 200]], dtype=np.uint8)
        flipped = img ^ np.uint8(0x80)
        assert np.abs(flipped.astype(int) - img).tolist() == [[128, 128]]

    def test_flip_rate(self):
        img = np.zeros((200, 200), dtype=np.uint8)
        bad = corrupt_binary(img, 0.05, EntropySource(2))
        frac = np.unpackbits(bad[..., None], axis=-1).mean()
        assert abs(frac - 0.05) < 0.002

    def test_rate_bounds(self):
        with pytest.raises(ValueError):
            binary_reference_with_flips(np.zeros((3, 3)), 0.6, EntropySource(1))


class TestStochastic:
    @pytest.mark.parametrize("bits", [1, 4, 64])
    @pytest.mark.parametrize("source", ["analytic", "device"])
    def test_constant_image_zero(self, bits, source):
        g = stochastic_roberts(np.full((4, 5), 140), DetectorConfig(bits=bits, seed=3, source=source))
        assert g.shape == (3, 4) and not g.any()

    def test_single_corner_256(self):
        g = stochastic_roberts([[255, 0], [0, 0]], DetectorConfig(bits=256, seed=4))
        assert abs(g[0, 0] - 0.5) <= 0.10

    def test_range_and_shape(self, small_image):
        g = stochastic_roberts(small_image, DetectorConfig(bits=16, seed=5))
        assert g.shape == (15, 15) and g.min() >= 0.0 and g.max() <= 1.0

    def test_deterministic(self, small_image):
        cfg = DetectorConfig(bits=32, seed=6, flip=FlipSpec("independent", 0.2))
        assert np.array_equal(stochastic_roberts(small_image, cfg), stochastic_roberts(small_image, cfg))

    def test_seed_changes_output(self, small_image):
        a = stochastic_roberts(small_image, DetectorConfig(bits=32, seed=6))
        b = stochastic_roberts(small_image, DetectorConfig(bits=32, seed=7))
        assert not np.array_equal(a, b)

    def test_pixel_recomputed_in_isolation(self, small_image):
        # Any single pixel can be rebuilt from its own substreams, independent of scan order.
        n = 40
        cfg = DetectorConfig(bits=n, seed=8)
        g = stochastic_roberts(small_image, cfg)
        frame = EntropySource(8).child("frame", 0)
        p = small_image / 255.0
        for r, c in [(0, 0), (7, 3), (14, 14)]:
            ux = frame.child(r, c, "pairX").uniforms(n)
            uy = frame.child(r, c, "pairY").uniforms(n)
            us = frame.child(r, c, "select").uniforms((n + 1) // 2)
            gx = (ux < p[r, c]) ^ (ux < p[r + 1, c + 1])
            gy = (uy < p[r, c + 1]) ^ (uy < p[r + 1, c])
            s = hold_select((us < 0.5).astype(np.uint8), n)
            assert g[r, c] == np.where(s == 1, gy, gx).mean()

    def test_parallel_schedule_identical(self, small_image):
        cfg = DetectorConfig(bits=24, seed=9)
        serial = [stochastic_roberts(small_image, cfg, frame_index=k) for k in range(4)]
        with ThreadPoolExecutor(4) as pool:
            parallel = list(pool.map(lambda k: stochastic_roberts(small_image, cfg, frame_index=k), reversed(range(4))))
        for a, b in zip(serial, reversed(parallel)):
            assert np.array_equal(a, b)

    @pytest.mark.parametrize("rate", [0.1, 0.3, 0.5])
    def test_shared_mask_bit_identical(self, small_image, rate):
        clean = stochastic_roberts_streams(small_image, DetectorConfig(bits=256, seed=10))
        hit = stochastic_roberts_streams(small_image, DetectorConfig(bits=256, seed=10, flip=FlipSpec("shared-mask", rate)))
        assert not np.array_equal(clean.x_pair[0], hit.x_pair[0])
        assert np.array_equal(clean.gx, hit.gx) and np.array_equal(clean.gy, hit.gy)
        assert np.array_equal(clean.output, hit.output)

    def test_zero_rate_matches_no_flip(self, small_image):
        base = stochastic_roberts(small_image, DetectorConfig(bits=64, seed=11))
        for mode in ("independent", "shared-mask", "exact-count"):
            g = stochastic_roberts(small_image, DetectorConfig(bits=64, seed=11, flip=FlipSpec(mode, 0.0)))
            assert np.array_equal(base, g)

    def test_independent_half_flips_destroy_signal(self):
        streams = stochastic_roberts_streams(np.full((4, 4), 200), DetectorConfig(
            bits=20_000, seed=12, flip=FlipSpec("independent", 0.5)))
        np.testing.assert_allclose(streams.gx.mean(axis=-1), 0.5, atol=0.015)
        np.testing.assert_allclose(streams.gy.mean(axis=-1), 0.5, atol=0.015)

    def test_exact_count_flips(self, small_image):
        clean = stochastic_roberts_streams(small_image, DetectorConfig(bits=100, seed=13))
        hit = stochastic_roberts_streams(small_image, DetectorConfig(bits=100, seed=13, flip=FlipSpec("exact-count", 0.25)))
        assert np.all((clean.x_pair[0] ^ hit.x_pair[0]).sum(axis=-1) == 25)
        assert np.all((clean.y_pair[1] ^ hit.y_pair[1]).sum(axis=-1) == 25)
        assert np.array_equal(clean.select, hit.select)

    def test_unbiased(self):
        img = np.random.default_rng(14).integers(0, 256, (5, 5))
        runs = [stochastic_roberts(img, DetectorConfig(bits=10_000, seed=s)) for s in range(10)]
        np.testing.assert_allclose(np.mean(runs, axis=0), reference_roberts(img), atol=0.01)

    def test_device_source_unbiased(self):
        img = np.random.default_rng(15).integers(0, 256, (5, 5))
        runs = [stochastic_roberts(img, DetectorConfig(bits=10_000, seed=s, source="device")) for s in range(10)]
        np.testing.assert_allclose(np.mean(runs, axis=0), reference_roberts(img), atol=0.01)

    def test_convergence_in_bits(self, small_image):
        ref = reference_roberts(small_image)
        votes = 0
        for seed in range(30):
            errs = [np.abs(stochastic_roberts(small_image, DetectorConfig(bits=n, seed=seed)) - ref).mean()
                    for n in (4, 16, 64, 256)]
            votes += all(b <= a for a, b in zip(errs, errs[1:]))
        assert votes > 15

    def test_config_validation(self):
        with pytest.raises(ValueError):
            DetectorConfig(bits=0, seed=1)
        with pytest.raises(ValueError):
            DetectorConfig(bits=4, seed=1, source="camera")

    def test_odd_bit_length(self):
        g = stochastic_roberts([[255, 0], [0, 0]], DetectorConfig(bits=7, seed=16))
        assert g.shape == (1, 1) and (g[0, 0] * 7) == round(g[0, 0] * 7)


class TestBundledFrame:
    def test_matches_renderer(self):
        np.testing.assert_array_equal(bundled_frame(), render_frame(96))

    def test_size(self):
        img = bundled_frame()
        assert img.shape[0] >= 64 and img.shape[1] >= 64 and img.dtype == np.uint8

    def test_has_structure(self):
        g = reference_roberts(bundled_frame())
        assert 0.05 < np.mean(g > 0) < 0.6


def test_held_select_output_variance():
    # Adjacent output bits share a select bit, so the decoded spread grows with |Gx - Gy|.
    n, seeds = 2_000, 400
    img = np.array([[255, 0], [0, 0]], dtype=np.uint8)  # Gx = 1, Gy = 0
    values = [stochastic_roberts(img, DetectorConfig(bits=n, seed=s))[0, 0] for s in range(seeds)]
    assert np.std(values) == pytest.approx(np.sqrt(0.25 / (n // 2)), rel=0.12)
    assert np.std(values) > 1.25 * np.sqrt(0.25 / n)

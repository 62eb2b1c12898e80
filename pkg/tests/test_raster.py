import numpy as np
import pytest
from hypothesis import given, strategies as st

from irblock.geometry import Block, Genome, MaskBox, RotRect, block_to_rect, rect_from_params
from irblock.raster import (
    composite,
    coverage_union,
    from_uint8,
    load_png,
    rasterize,
    save_png,
    to_uint8,
    validate_image,
)

from reference import rasterize_bruteforce


def genome_of(blocks: list[Block]) -> Genome:
    genes = np.concatenate([b.genes() for b in blocks]) if blocks else np.zeros(0)
    k = len(blocks)
    lo = np.tile([0, 0, 0, 0, 0.0], k)
    hi = np.tile([1, 1, 1, 1, 180.0], k)
    return Genome(genes=genes, bounds_lo=lo, bounds_hi=hi)


def random_rect(rng, size=64) -> RotRect:
    return rect_from_params(
        anchor_x=rng.uniform(-5, size + 5),
        anchor_y=rng.uniform(-5, size + 5),
        length_px=rng.uniform(0.5, size * 0.6),
        width_px=rng.uniform(0.5, size * 0.4),
        angle_deg=rng.uniform(0, 180),
    )


class TestRasterize:
    def test_axis_aligned_enumeration(self):
        rect = RotRect(corners=((2.0, 2.0), (2.0, 6.0), (5.0, 6.0), (5.0, 2.0)))
        mask = MaskBox(0, 0, 8, 8)
        cov = rasterize(rect, mask, (8, 8))
        assert cov.sum() == 12
        ys, xs = np.nonzero(cov)
        assert set(xs.tolist()) == {2, 3, 4}
        assert set(ys.tolist()) == {2, 3, 4, 5}
        assert np.array_equal(cov, rasterize_bruteforce(rect, mask, (8, 8)))

    def test_outside_mask_is_empty(self):
        rect = rect_from_params(20, 20, 5, 3, 15.0)
        mask = MaskBox(0, 0, 8, 8)
        assert not rasterize(rect, mask, (32, 32)).any()

    def test_degenerate_rect_is_empty(self):
        rect = rect_from_params(4, 4, 0.0, 0.0, 30.0)
        assert not rasterize(rect, MaskBox(0, 0, 8, 8), (8, 8)).any()

    def test_matches_bruteforce_on_random_rects(self, rng):
        mask = MaskBox(0, 0, 24, 24)
        for _ in range(80):
            rect = random_rect(rng, size=24)
            got = rasterize(rect, mask, (24, 24))
            want = rasterize_bruteforce(rect, mask, (24, 24))
            assert np.array_equal(got, want)

    def test_matches_bruteforce_with_clipping_masks(self, rng):
        for _ in range(40):
            mask = MaskBox(
                int(rng.integers(0, 10)),
                int(rng.integers(0, 10)),
                int(rng.integers(1, 14)),
                int(rng.integers(1, 14)),
            )
            rect = random_rect(rng, size=24)
            got = rasterize(rect, mask, (24, 24))
            want = rasterize_bruteforce(rect, mask, (24, 24))
            assert np.array_equal(got, want)

    def test_rejects_bad_dims(self):
        with pytest.raises(ValueError):
            rasterize(rect_from_params(0, 0, 1, 1, 0), MaskBox(0, 0, 4, 4), (0, 4))


class TestComposite:
    def test_zero_area_blocks_identity(self, rng):
        img = rng.random((16, 16))
        g = genome_of([Block(0.5, 0.5, 0.9, 0.0, 10.0)])
        out = composite(img, g, MaskBox(0, 0, 16, 16))
        assert np.array_equal(out, img)

    def test_zero_block_genome_identity(self, rng):
        img = rng.random((16, 16))
        out = composite(img, genome_of([]), MaskBox(0, 0, 16, 16))
        assert np.array_equal(out, img)

    def test_single_block_pixel_count(self, rng):
        img = np.full((32, 32), 0.3)
        mask = MaskBox(4, 4, 20, 20)
        block = Block(0.2, 0.1, 0.9, 0.4, 25.0)
        n = rasterize_bruteforce(block_to_rect(block, mask), mask, img.shape).sum()
        out = composite(img, genome_of([block]), mask)
        assert (out == 0.9).sum() == n
        assert (out != img).sum() == n

    def test_overlap_highest_index_wins(self):
        img = np.full((16, 16), 0.5)
        mask = MaskBox(0, 0, 16, 16)
        first = Block(0.1, 0.1, 0.1, 0.5, 0.0)
        second = Block(0.1, 0.1, 0.9, 0.5, 0.0)
        out = composite(img, genome_of([first, second]), mask)
        # the second block is wider (hot) and fully covers the first
        assert not (out == 0.1).any()
        assert (out == 0.9).any()

    @given(
        bx=st.integers(min_value=0, max_value=10),
        by=st.integers(min_value=0, max_value=10),
        bw=st.integers(min_value=1, max_value=12),
        bh=st.integers(min_value=1, max_value=12),
        u=st.floats(min_value=0, max_value=1),
        v=st.floats(min_value=0, max_value=1),
        c=st.floats(min_value=0, max_value=1),
        rel=st.floats(min_value=0.05, max_value=1.0),
        angle=st.floats(min_value=0, max_value=180),
    )
    def test_untouched_outside_mask_and_count(self, bx, by, bw, bh, u, v, c, rel, angle):
        rng = np.random.default_rng(7)
        img = rng.random((24, 24))
        mask = MaskBox(bx, by, bw, bh)
        g = genome_of([Block(u, v, c, rel, angle)])
        out = composite(img, g, mask)
        outside = np.ones_like(img, dtype=bool)
        outside[by : by + bh, bx : bx + bw] = False
        assert np.array_equal(out[outside], img[outside])
        union = coverage_union(g, mask, img.shape)
        assert np.all(out[union] == c)
        # changed set is exactly the covered pixels whose value actually moved
        assert np.array_equal(out != img, union & (img != c))

    def test_changed_set_equals_union_when_values_differ(self, rng):
        img = np.zeros((24, 24))
        mask = MaskBox(2, 2, 20, 20)
        blocks = [Block(0.2, 0.2, 0.9, 0.4, 30.0), Block(0.5, 0.5, 0.8, 0.3, 120.0)]
        g = genome_of(blocks)
        out = composite(img, g, mask)
        union = coverage_union(g, mask, img.shape)
        assert np.array_equal(out != img, union)

    def test_deterministic(self, rng):
        img = rng.random((20, 20))
        g = genome_of([Block(0.3, 0.3, 0.7, 0.5, 77.0)])
        mask = MaskBox(1, 1, 18, 18)
        a = composite(img, g, mask)
        b = composite(img, g, mask)
        assert np.array_equal(a, b)

    def test_input_not_modified(self, rng):
        img = rng.random((16, 16))
        copy = img.copy()
        composite(img, genome_of([Block(0.2, 0.2, 0.9, 0.8, 45.0)]), MaskBox(0, 0, 16, 16))
        assert np.array_equal(img, copy)


class TestPngIO:
    def test_quantization_round_half_up(self):
        img = np.array([[0.0, 1.0, 0.5, 127.4 / 255.0, 127.5 / 255.0]])
        assert to_uint8(img).tolist() == [[0, 255, 128, 127, 128]]

    def test_round_trip_preserves_uint8_grid(self, rng, tmp_path):
        raw = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
        img = from_uint8(raw)
        path = tmp_path / "img.png"
        save_png(path, img)
        assert np.array_equal(load_png(path), img)

    def test_validate_image_rejects_bad_values(self):
        with pytest.raises(ValueError):
            validate_image(np.full((4, 4), 1.5))
        with pytest.raises(ValueError):
            validate_image(np.zeros((4, 4, 3)))

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pmuse import colors
from pmuse.colors import (LabColor, Palette, RgbColor, ScaledLab, bin_center, code_to_hex,
                          hex_to_code, hex_to_rgb, lab_distance, order_palette, quantize,
                          scale_lab, srgb_to_lab)


def oracle_rgb_to_lab(r, g, b):
    """Straight textbook sRGB(D65)->CIELAB, written separately from the library."""
    chans = []
    for v in (r, g, b):
        v = v / 255.0
        chans.append(((v + 0.055) / 1.055) ** 2.4 if v > 0.04045 else v / 12.92)
    m = [[0.4124564, 0.3575761, 0.1804375],
         [0.2126729, 0.7151522, 0.0721750],
         [0.0193339, 0.1191920, 0.9503041]]
    x = m[0][0] * chans[0] + m[0][1] * chans[1] + m[0][2] * chans[2]
    y = m[1][0] * chans[0] + m[1][1] * chans[1] + m[1][2] * chans[2]
    z = m[2][0] * chans[0] + m[2][1] * chans[1] + m[2][2] * chans[2]
    xn, yn, zn = (sum(row) for row in m)

    def f(t):
        return t ** (1 / 3) if t > 216 / 24389 else (24389 / 27 * t + 16) / 116

    fx, fy, fz = f(x / xn), f(y / yn), f(z / zn)
    return 116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)


class TestSrgbToLab:
    def test_white(self):
        lab = srgb_to_lab(RgbColor(255, 255, 255))
        assert lab.l == pytest.approx(100.0, abs=1e-3)
        assert lab.a == pytest.approx(0.0, abs=1e-3)
        assert lab.b == pytest.approx(0.0, abs=1e-3)

    def test_black(self):
        lab = srgb_to_lab(RgbColor(0, 0, 0))
        assert (lab.l, lab.a, lab.b) == pytest.approx((0.0, 0.0, 0.0), abs=1e-9)

    def test_red(self):
        lab = srgb_to_lab(RgbColor(255, 0, 0))
        assert lab.l == pytest.approx(53.24, abs=0.01)
        assert lab.a == pytest.approx(80.09, abs=0.01)
        assert lab.b == pytest.approx(67.20, abs=0.01)

    def test_matches_independent_oracle_on_256_colors(self):
        rng = np.random.default_rng(42)
        for _ in range(256):
            r, g, b = (int(v) for v in rng.integers(0, 256, size=3))
            lab = srgb_to_lab(RgbColor(r, g, b))
            ol, oa, ob = oracle_rgb_to_lab(r, g, b)
            assert lab.l == pytest.approx(ol, abs=1e-3)
            assert lab.a == pytest.approx(oa, abs=1e-3)
            assert lab.b == pytest.approx(ob, abs=1e-3)

    def test_close_to_skimage(self):
        # cross-library sanity; skimage's matrix/white pair differs in the 5th
        # decimal, so the bound is looser than the self-consistent oracle's
        skimage_color = pytest.importorskip("skimage.color")
        rng = np.random.default_rng(7)
        rgbs = rng.integers(0, 256, size=(64, 3), dtype=np.uint8)
        ref = skimage_color.rgb2lab(rgbs[None, :, :])[0]
        for (r, g, b), expected in zip(rgbs, ref):
            lab = srgb_to_lab(RgbColor(int(r), int(g), int(b)))
            assert np.allclose([lab.l, lab.a, lab.b], expected, atol=2e-2)

    def test_bad_channel_rejected(self):
        with pytest.raises(ValueError):
            RgbColor(-1, 0, 0)
        with pytest.raises(ValueError):
            RgbColor(0, 256, 0)


class TestScaleLab:
    def test_endpoints(self):
        assert scale_lab(LabColor(100, 0, 0)) == ScaledLab(255.0, 128.0, 128.0)
        assert scale_lab(LabColor(0, 0, 0)) == ScaledLab(0.0, 128.0, 128.0)

    def test_red_example(self):
        s = scale_lab(LabColor(53.24, 80.09, 67.20))
        assert (s.l, s.a, s.b) == pytest.approx((135.76, 208.09, 195.20), abs=0.01)

    @given(st.floats(-500, 500), st.floats(-500, 500), st.floats(-500, 500))
    def test_always_in_range(self, l, a, b):
        s = scale_lab(LabColor(l, a, b))
        for v in (s.l, s.a, s.b):
            assert 0.0 <= v <= 255.0


class TestQuantize:
    def test_black_white_and_red(self):
        assert quantize(ScaledLab(0, 128, 128)) == 136
        assert quantize(ScaledLab(255, 128, 128)) == 3976
        assert quantize(ScaledLab(135.76, 208.09, 195.20)) == 2268

    def test_bin_center_examples(self):
        assert bin_center(0) == ScaledLab(8.0, 8.0, 8.0)
        assert bin_center(4095) == ScaledLab(248.0, 248.0, 248.0)
        assert bin_center(2268) == ScaledLab(136.0, 216.0, 200.0)

    def test_quantize_bin_center_identity_all_codes(self):
        for code in range(colors.NUM_CODES):
            assert quantize(bin_center(code)) == code

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            quantize(ScaledLab(-0.1, 0, 0))
        with pytest.raises(ValueError):
            bin_center(4096)
        with pytest.raises(ValueError):
            bin_center(-1)


class TestOrderPalette:
    def test_black_before_white(self):
        assert order_palette([3976, 136]) == [136, 3976]

    def test_empty(self):
        assert order_palette([]) == []

    def test_three_codes(self):
        assert order_palette([2268, 2269, 136]) == [136, 2268, 2269]

    def test_matches_bruteforce_sort(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            codes = [int(c) for c in rng.integers(0, 4096, size=5)]
            expected = sorted(codes, key=lambda c: (c // 256, c))
            assert order_palette(codes) == expected

    def test_too_many_rejected(self):
        with pytest.raises(ValueError):
            order_palette([0, 1, 2, 3, 4, 5])

    @given(st.lists(st.integers(0, 4095), max_size=5))
    def test_idempotent_permutation(self, codes):
        once = order_palette(codes)
        assert order_palette(once) == once
        assert sorted(once) == sorted(codes)


class TestLabDistance:
    def test_self_distance_zero(self):
        for code in (0, 136, 2268, 4095):
            assert lab_distance(code, code) == 0.0

    def test_black_white(self):
        assert lab_distance(136, 3976) == pytest.approx(94.12, abs=0.01)

    def test_symmetry(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            p, q = (int(v) for v in rng.integers(0, 4096, size=2))
            assert lab_distance(p, q) == lab_distance(q, p)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(13)
        for _ in range(1000):
            a, b, c = (int(v) for v in rng.integers(0, 4096, size=3))
            assert lab_distance(a, c) <= lab_distance(a, b) + lab_distance(b, c) + 1e-9


class TestHex:
    def test_parse_and_emit(self):
        assert hex_to_rgb("#00ff7f") == RgbColor(0, 255, 127)
        assert colors.rgb_to_hex(RgbColor(0, 255, 127)) == "#00ff7f"
        assert colors.normalize_hex("#A0B1C2") == "#a0b1c2"

    @pytest.mark.parametrize("bad", ["", "ffffff", "#fff", "#gggggg", "#1234567", 123])
    def test_bad_hex_rejected(self, bad):
        with pytest.raises(ValueError):
            hex_to_rgb(bad)

    def test_hex_to_code_examples(self):
        assert hex_to_code("#000000") == 136
        assert hex_to_code("#ffffff") == 3976
        assert hex_to_code("#ff0000") == 2268

    def test_code_to_hex_is_displayable(self):
        for code in (136, 2268, 3976):
            h = code_to_hex(code)
            assert len(h) == 7 and h[0] == "#"


class TestPalette:
    def test_from_hexes_orders_by_lightness(self):
        pal = Palette.from_hexes("graphic", ["#ffffff", "#000000"])
        assert pal.colors == [136, 3976]
        assert pal.hexes == ["#000000", "#ffffff"]

    def test_hex_consistency_enforced(self):
        with pytest.raises(ValueError):
            Palette("graphic", [136], ["#ffffff"])

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            Palette("banner", [], [])

    def test_max_five(self):
        with pytest.raises(ValueError):
            Palette.from_hexes("image", ["#000000"] * 6)

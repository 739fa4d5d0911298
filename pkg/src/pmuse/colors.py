"""Color primitives: sRGB <-> CIELAB conversion, 16x16x16 quantization into color
codes, lightness-based palette ordering, and the distance used by the palette
metrics.

Colors travel externally as "#rrggbb" hex strings; internally they become
integer color codes in [0, 4095], the model's vocabulary unit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

BINS = 16
BIN_WIDTH = 256.0 / BINS
NUM_CODES = BINS ** 3

# sRGB (D65, 2 degree observer) -> XYZ. The reference white below is exactly the
# row sums of this matrix, which keeps (255,255,255) -> L*=100, a*=b*=0.
_M_RGB_TO_XYZ = (
    (0.4124564, 0.3575761, 0.1804375),
    (0.2126729, 0.7151522, 0.0721750),
    (0.0193339, 0.1191920, 0.9503041),
)
_M_XYZ_TO_RGB = (
    (3.2404542, -1.5371385, -0.4985314),
    (-0.9692660, 1.8760108, 0.0415560),
    (0.0556434, -0.2040259, 1.0572252),
)
_WHITE = tuple(sum(row) for row in _M_RGB_TO_XYZ)
_EPS = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0

_HEX_RE = re.compile(r"^#[0-9a-fA-F]{6}$")


@dataclass(frozen=True)
class RgbColor:
    r: int
    g: int
    b: int

    def __post_init__(self):
        for name in ("r", "g", "b"):
            v = getattr(self, name)
            if not isinstance(v, int) or not 0 <= v <= 255:
                raise ValueError(f"channel {name}={v!r} outside [0,255]")


@dataclass(frozen=True)
class LabColor:
    l: float
    a: float
    b: float


@dataclass(frozen=True)
class ScaledLab:
    l: float
    a: float
    b: float


def _transfer(u: float) -> float:
    # sRGB electro-optical transfer, channel in [0,1]
    if u > 0.04045:
        return ((u + 0.055) / 1.055) ** 2.4
    return u / 12.92


def _transfer_inv(u: float) -> float:
    if u > 0.0031308:
        return 1.055 * u ** (1.0 / 2.4) - 0.055
    return 12.92 * u


def _f(t: float) -> float:
    if t > _EPS:
        return t ** (1.0 / 3.0)
    return (_KAPPA * t + 16.0) / 116.0


def _f_inv(t: float) -> float:
    t3 = t ** 3
    if t3 > _EPS:
        return t3
    return (116.0 * t - 16.0) / _KAPPA


def srgb_to_lab(c: RgbColor) -> LabColor:
    """Standard sRGB -> XYZ(D65) -> CIELAB."""
    lin = (_transfer(c.r / 255.0), _transfer(c.g / 255.0), _transfer(c.b / 255.0))
    xyz = [sum(m * v for m, v in zip(row, lin)) for row in _M_RGB_TO_XYZ]
    fx, fy, fz = (_f(x / w) for x, w in zip(xyz, _WHITE))
    return LabColor(116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))


def lab_to_srgb(c: LabColor) -> RgbColor:
    """Inverse conversion for display; out-of-gamut values clamp per channel."""
    fy = (c.l + 16.0) / 116.0
    fx = fy + c.a / 500.0
    fz = fy - c.b / 200.0
    xyz = [w * _f_inv(f) for f, w in zip((fx, fy, fz), _WHITE)]
    chans = []
    for row in _M_XYZ_TO_RGB:
        lin = sum(m * v for m, v in zip(row, xyz))
        lin = min(max(lin, 0.0), 1.0)
        chans.append(int(round(_transfer_inv(lin) * 255.0)))
    return RgbColor(*(min(max(v, 0), 255) for v in chans))


def scale_lab(c: LabColor) -> ScaledLab:
    """Map native CIELAB units onto [0,255] per channel (clamped)."""

    def clamp(v: float) -> float:
        return min(max(v, 0.0), 255.0)

    return ScaledLab(clamp(c.l * 255.0 / 100.0), clamp(c.a + 128.0), clamp(c.b + 128.0))


def unscale_lab(c: ScaledLab) -> LabColor:
    return LabColor(c.l * 100.0 / 255.0, c.a - 128.0, c.b - 128.0)


def quantize(c: ScaledLab) -> int:
    """Assign a scaled Lab point to its bin in the 16^3 histogram."""
    idx = []
    for v in (c.l, c.a, c.b):
        if not 0.0 <= v <= 255.0:
            raise ValueError(f"scaled component {v} outside [0,255]")
        idx.append(min(int(v // BIN_WIDTH), BINS - 1))
    return (idx[0] * BINS + idx[1]) * BINS + idx[2]


def code_indices(code: int) -> tuple[int, int, int]:
    if not isinstance(code, int) or not 0 <= code < NUM_CODES:
        raise ValueError(f"color code {code!r} outside [0,{NUM_CODES - 1}]")
    return code // 256, (code // 16) % 16, code % 16


def bin_center(code: int) -> ScaledLab:
    il, ia, ib = code_indices(code)
    return ScaledLab((il + 0.5) * BIN_WIDTH, (ia + 0.5) * BIN_WIDTH, (ib + 0.5) * BIN_WIDTH)


def code_lab(code: int) -> LabColor:
    """Native-unit CIELAB center of a code's bin."""
    return unscale_lab(bin_center(code))


def order_palette(colors: list[int]) -> list[int]:
    """Stable ascending sort by lightness bin, ties by full code."""
    if len(colors) > 5:
        raise ValueError(f"palette has {len(colors)} colors, maximum is 5")
    for c in colors:
        code_indices(c)
    # the code integer is (iL, ia, ib) lexicographic, so one key covers both
    return sorted(colors)


def lab_distance(p: int, q: int) -> float:
    """Euclidean distance between bin centers in native CIELAB units."""
    cp, cq = code_lab(p), code_lab(q)
    return ((cp.l - cq.l) ** 2 + (cp.a - cq.a) ** 2 + (cp.b - cq.b) ** 2) ** 0.5


def hex_to_rgb(s: str) -> RgbColor:
    if not isinstance(s, str) or not _HEX_RE.match(s):
        raise ValueError(f"bad hex color {s!r}, expected '#rrggbb'")
    return RgbColor(int(s[1:3], 16), int(s[3:5], 16), int(s[5:7], 16))


def rgb_to_hex(c: RgbColor) -> str:
    return f"#{c.r:02x}{c.g:02x}{c.b:02x}"


def normalize_hex(s: str) -> str:
    hex_to_rgb(s)
    return s.lower()


def hex_to_code(s: str) -> int:
    return quantize(scale_lab(srgb_to_lab(hex_to_rgb(s))))


def code_to_hex(code: int) -> str:
    """Displayable hex for a code's bin center (gamut-clamped)."""
    return rgb_to_hex(lab_to_srgb(code_lab(code)))


PALETTE_KINDS = ("image", "graphic", "text")


@dataclass
class Palette:
    """Up to five color codes of one element group, lightness-ordered.

    ``hexes[i]`` is the sRGB source of ``colors[i]`` (kept so palettes survive
    a save/load round trip exactly; bin centers can fall outside the sRGB
    gamut).
    """

    kind: str
    colors: list[int]
    hexes: list[str]

    def __post_init__(self):
        if self.kind not in PALETTE_KINDS:
            raise ValueError(f"unknown palette kind {self.kind!r}")
        if len(self.colors) > 5:
            raise ValueError(f"palette has {len(self.colors)} colors, maximum is 5")
        if len(self.hexes) != len(self.colors):
            raise ValueError("palette hex list must parallel the color codes")
        for h, c in zip(self.hexes, self.colors):
            if hex_to_code(h) != c:
                raise ValueError(f"hex {h} quantizes to {hex_to_code(h)}, not {c}")

    @classmethod
    def from_hexes(cls, kind: str, hex_colors: list[str]) -> "Palette":
        pairs = sorted(
            ((hex_to_code(h), normalize_hex(h)) for h in hex_colors),
            key=lambda p: p[0],
        )
        return cls(kind, [c for c, _ in pairs], [h for _, h in pairs])

    def __len__(self):
        return len(self.colors)

"""Synthetic traffic-sign rasters and adversarial overlays.

Everything here is a pure function of its inputs and seeds.  Rasters carry two
optional bookkeeping masks next to the pixels: ``sign_mask`` (pixels inside the
sign outline) and ``glyph_mask`` (legend glyph pixels), which the perturbation
code uses to keep overlays on the sign and to measure legend occlusion.  They
are not written to PPM files.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .font import FONT, GLYPH_COLS, GLYPH_ROWS

PALETTE = {
    "red": (204, 0, 0),
    "white": (255, 255, 255),
    "blue": (0, 70, 160),
    "yellow": (255, 204, 0),
    "black": (0, 0, 0),
    "green": (0, 128, 60),
    "orange": (255, 128, 0),
}
BACKGROUND = (128, 128, 128)
SHAPES = ("octagon", "circle", "triangle", "diamond", "rectangle")
BORDER_FRACTION = 0.08
LEGEND_CELL = 1 / 40  # glyph cell edge as a fraction of scale
LEGEND_LIMIT = 0.8
VARIANTS = ("base", "rp2_subtle", "rp2_graffiti", "rp2_art", "advcam")


class SpecError(ValueError):
    pass


class LegendTooLong(SpecError):
    pass


@dataclass(frozen=True)
class Word:
    text: str


@dataclass(frozen=True)
class Number:
    value: int

    @property
    def text(self) -> str:
        return str(self.value)


Legend = Union[Word, Number, None]


@dataclass(frozen=True)
class SignSpec:
    sign_id: str
    shape: str
    fill_color: str
    border_color: str
    legend: Legend = None
    legend_color: str = "black"
    rotation_deg: float = 0.0
    scale: int = 120
    jitter: int = 0
    jitter_seed: int = 0

    def validate(self) -> None:
        if self.shape not in SHAPES:
            raise SpecError(f"unknown shape {self.shape!r}")
        for c in (self.fill_color, self.border_color, self.legend_color):
            if c not in PALETTE:
                raise SpecError(f"color {c!r} is not in the palette")
        if not -15 <= self.rotation_deg <= 15:
            raise SpecError("rotation_deg must lie in [-15, 15]")
        if self.scale <= 0:
            raise SpecError("scale must be positive")
        if not 0 <= self.jitter <= 10:
            raise SpecError("jitter must lie in [0, 10]")
        if self.legend is not None:
            text = self.legend.text
            if not text or any(ch not in FONT.glyphs for ch in text):
                raise SpecError(f"legend {text!r} uses characters outside A-Z, 0-9")

    def to_dict(self) -> dict:
        legend = None
        if isinstance(self.legend, Word):
            legend = {"word": self.legend.text}
        elif isinstance(self.legend, Number):
            legend = {"number": self.legend.value}
        return {"sign_id": self.sign_id, "shape": self.shape, "fill_color": self.fill_color,
                "border_color": self.border_color, "legend": legend, "legend_color": self.legend_color,
                "rotation_deg": self.rotation_deg, "scale": self.scale, "jitter": self.jitter,
                "jitter_seed": self.jitter_seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SignSpec":
        d = dict(d)
        leg = d.pop("legend", None)
        legend = None
        if leg and "word" in leg:
            legend = Word(leg["word"])
        elif leg and "number" in leg:
            legend = Number(int(leg["number"]))
        return cls(legend=legend, **d)


@dataclass
class Raster:
    pixels: np.ndarray  # (height, width, 3) uint8
    sign_mask: Optional[np.ndarray] = field(default=None, repr=False)
    glyph_mask: Optional[np.ndarray] = field(default=None, repr=False)
    occlusion: float = 0.0

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3 or self.pixels.dtype != np.uint8:
            raise ValueError("pixels must be an (h, w, 3) uint8 array")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def to_ppm(self) -> bytes:
        header = f"P6\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + np.ascontiguousarray(self.pixels).tobytes()

    @classmethod
    def from_ppm(cls, data: bytes) -> "Raster":
        fields = []
        pos = 0
        while len(fields) < 4:
            while data[pos:pos + 1].isspace():
                pos += 1
            if data[pos:pos + 1] == b"#":
                pos = data.index(b"\n", pos) + 1
                continue
            end = pos
            while not data[end:end + 1].isspace():
                end += 1
            fields.append(data[pos:end])
            pos = end
        if fields[0] != b"P6" or int(fields[3]) != 255:
            raise ValueError("only binary 8-bit PPM (P6) is supported")
        w, h = int(fields[1]), int(fields[2])
        body = data[pos + 1:pos + 1 + w * h * 3]
        if len(body) != w * h * 3:
            raise ValueError("truncated PPM data")
        return cls(np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).copy())

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_ppm())

    @classmethod
    def load(cls, path) -> "Raster":
        with open(path, "rb") as fh:
            return cls.from_ppm(fh.read())


# --------------------------------------------------------------------------
# geometry

def canvas_size(scale: int) -> int:
    return scale + 2 * max(4, round(0.125 * scale))


def _halfplanes(shape: str, radius: float, rotation: float):
    """(normal angles, apothems) describing a convex outline."""
    rot = math.radians(rotation)
    if shape == "octagon":
        angles = [k * math.pi / 4 for k in range(8)]
        apo = [radius * math.cos(math.pi / 8)] * 8
    elif shape == "triangle":
        # vertex pointing down (image y grows downwards)
        angles = [math.pi / 2 + math.pi / 3 + k * 2 * math.pi / 3 for k in range(3)]
        apo = [radius * 0.5] * 3
    elif shape == "diamond":
        angles = [math.pi / 4 + k * math.pi / 2 for k in range(4)]
        apo = [radius * math.cos(math.pi / 4)] * 4
    elif shape == "rectangle":
        angles = [0.0, math.pi / 2, math.pi, 3 * math.pi / 2]
        apo = [radius, radius * 0.7, radius, radius * 0.7]
    else:
        raise SpecError(f"{shape!r} is not polygonal")
    return [a + rot for a in angles], apo


def shape_mask(shape: str, size: int, radius: float, rotation: float = 0.0, inset: float = 0.0,
               center: Optional[tuple[float, float]] = None) -> np.ndarray:
    """Pixels (by centre point) inside the outline shrunk by ``inset``."""
    cx, cy = center if center is not None else (size / 2, size / 2)
    ys, xs = np.mgrid[0:size, 0:size]
    dx = xs + 0.5 - cx
    dy = ys + 0.5 - cy
    if shape == "circle":
        return dx * dx + dy * dy <= (radius - inset) ** 2
    angles, apo = _halfplanes(shape, radius, rotation)
    inside = np.ones((size, size), dtype=bool)
    for a, h in zip(angles, apo):
        inside &= dx * math.cos(a) + dy * math.sin(a) <= h - inset
    return inside


def legend_layout(spec: SignSpec) -> Optional[tuple[int, int, int]]:
    """(cell size, left x, top y) of the legend row, or None without legend."""
    if spec.legend is None:
        return None
    n = len(spec.legend.text)
    units_w = GLYPH_COLS * n + (n - 1)
    u = max(1, int(round(spec.scale * LEGEND_CELL)))
    if u * units_w > LEGEND_LIMIT * spec.scale:
        raise LegendTooLong(f"legend {spec.legend.text!r} does not fit a sign of scale {spec.scale}")
    size = canvas_size(spec.scale)
    left = int(round(size / 2 - u * units_w / 2))
    top = int(round(size / 2 - u * GLYPH_ROWS / 2))
    return u, left, top


def legend_mask(spec: SignSpec) -> np.ndarray:
    size = canvas_size(spec.scale)
    mask = np.zeros((size, size), dtype=bool)
    layout = legend_layout(spec)
    if layout is None:
        return mask
    u, left, top = layout
    for k, ch in enumerate(spec.legend.text):
        glyph = np.kron(FONT.bitmap(ch), np.ones((u, u), dtype=bool))
        x0 = left + k * (GLYPH_COLS + 1) * u
        mask[top:top + glyph.shape[0], x0:x0 + glyph.shape[1]] |= glyph
    return mask


def render(spec: SignSpec) -> Raster:
    """Rasterize a sign: outline in the border colour, inset fill, legend."""
    spec.validate()
    size = canvas_size(spec.scale)
    radius = spec.scale / 2
    border = BORDER_FRACTION * spec.scale
    outer = shape_mask(spec.shape, size, radius, spec.rotation_deg)
    inner = shape_mask(spec.shape, size, radius, spec.rotation_deg, inset=border)
    glyphs = legend_mask(spec) & inner

    img = np.empty((size, size, 3), dtype=np.int16)
    img[:] = BACKGROUND
    img[outer] = PALETTE[spec.border_color]
    img[inner] = PALETTE[spec.fill_color]
    img[glyphs] = PALETTE[spec.legend_color]
    if spec.jitter:
        rng = np.random.default_rng(spec.jitter_seed)
        noise = rng.integers(-spec.jitter, spec.jitter + 1, size=img.shape, dtype=np.int16)
        img[outer] += noise[outer]
    return Raster(np.clip(img, 0, 255).astype(np.uint8), outer, glyphs)


# --------------------------------------------------------------------------
# perturbations

@dataclass(frozen=True)
class Sticker:
    rect: tuple[float, float, float, float]  # x0, y0, x1, y1 in pixels
    color: str
    severity: float = 0.0

    def mask(self, shape) -> np.ndarray:
        h, w = shape
        ys, xs = np.mgrid[0:h, 0:w]
        x0, y0, x1, y1 = self.rect
        return (xs + 0.5 >= x0) & (xs + 0.5 < x1) & (ys + 0.5 >= y0) & (ys + 0.5 < y1)


@dataclass(frozen=True)
class GraffitiStroke:
    points: tuple[tuple[float, float], ...]
    width: float
    color: str
    severity: float = 0.0

    def mask(self, shape) -> np.ndarray:
        h, w = shape
        ys, xs = np.mgrid[0:h, 0:w]
        px, py = xs + 0.5, ys + 0.5
        out = np.zeros(shape, dtype=bool)
        for (ax, ay), (bx, by) in zip(self.points, self.points[1:]):
            vx, vy = bx - ax, by - ay
            seg = vx * vx + vy * vy
            t = np.zeros(shape) if seg == 0 else np.clip(((px - ax) * vx + (py - ay) * vy) / seg, 0, 1)
            d2 = (px - ax - t * vx) ** 2 + (py - ay - t * vy) ** 2
            out |= d2 <= (self.width / 2) ** 2
        return out


@dataclass(frozen=True)
class Stain:
    center: tuple[float, float]
    axes: tuple[float, float]
    color: str
    alpha: float
    angle_deg: float = 0.0
    severity: float = 0.0

    def mask(self, shape) -> np.ndarray:
        h, w = shape
        ys, xs = np.mgrid[0:h, 0:w]
        a = math.radians(self.angle_deg)
        dx, dy = xs + 0.5 - self.center[0], ys + 0.5 - self.center[1]
        u = dx * math.cos(a) + dy * math.sin(a)
        v = -dx * math.sin(a) + dy * math.cos(a)
        return (u / self.axes[0]) ** 2 + (v / self.axes[1]) ** 2 <= 1


@dataclass(frozen=True)
class SubtleNoise:
    amplitude: int
    seed: int = 0
    severity: float = 1.0


Perturbation = Union[Sticker, GraffitiStroke, Stain, SubtleNoise]


def perturb(raster: Raster, perturbations, seed: int = 0) -> Raster:
    """Apply overlays in order; the result records legend occlusion.

    Sticker, stroke and stain overlays are clipped to the sign outline and
    count toward occlusion; noise does not occlude.
    """
    perturbations = list(perturbations)
    for p in perturbations:
        if not 0.0 <= p.severity <= 1.0:
            raise ValueError(f"severity {p.severity} outside [0, 1]")
    h, w = raster.height, raster.width
    sign = raster.sign_mask if raster.sign_mask is not None else np.ones((h, w), dtype=bool)
    img = raster.pixels.astype(np.float64)
    covered = np.zeros((h, w), dtype=bool)
    for k, p in enumerate(perturbations):
        if isinstance(p, SubtleNoise):
            rng = np.random.default_rng([seed, k, p.seed])
            noise = rng.integers(-p.amplitude, p.amplitude + 1, size=img.shape)
            img[sign] = np.clip(img[sign] + noise[sign], 0, 255)
            continue
        m = p.mask((h, w)) & sign
        rgb = np.array(PALETTE[p.color], dtype=np.float64)
        if isinstance(p, Stain):
            img[m] = np.round((1 - p.alpha) * img[m] + p.alpha * rgb)
        else:
            img[m] = rgb
        covered |= m
    occlusion = 0.0
    if raster.glyph_mask is not None and raster.glyph_mask.any():
        occlusion = float((covered & raster.glyph_mask).sum() / raster.glyph_mask.sum())
    out = np.clip(np.round(img), 0, 255).astype(np.uint8)
    return Raster(out, raster.sign_mask, raster.glyph_mask, occlusion)


# --------------------------------------------------------------------------
# attack layouts

def _sign_area(spec: SignSpec) -> float:
    return float(shape_mask(spec.shape, canvas_size(spec.scale), spec.scale / 2, spec.rotation_deg).sum())


def _legend_box(spec: SignSpec) -> tuple[float, float, float, float]:
    layout = legend_layout(spec)
    size = canvas_size(spec.scale)
    if layout is None:
        c = size / 2
        return (c - spec.scale * 0.25, c - spec.scale * 0.1, c + spec.scale * 0.25, c + spec.scale * 0.1)
    u, left, top = layout
    n = len(spec.legend.text)
    return (left, top, left + u * (6 * n - 1), top + u * GLYPH_ROWS)


def _bite(spec: SignSpec, severity: float, full: float) -> float:
    """How far a dark overlay reaches into the legend: 0.2 to 0.45 of a cell.

    Staying under half a cell keeps every glyph row readable by block
    sampling while still covering some glyph pixels.
    """
    u = _legend_box(spec)[3] - _legend_box(spec)[1]
    u /= GLYPH_ROWS
    return (0.2 + 0.25 * min(severity / full, 1.0)) * u


def _clearance(spec: SignSpec) -> float:
    """Gap kept between the legend and overlays of the legend's own colour."""
    x0, y0, x1, y1 = _legend_box(spec)
    return (y1 - y0) / GLYPH_ROWS + 1.0


def graffiti_layout(spec: SignSpec, severity: float, rng: np.random.Generator,
                    colors=("black", "white")) -> list[Sticker]:
    """Two stickers spanning the legend width, one above and one below it.

    A sticker in the legend colour keeps clear of the glyphs; any other
    colour bites into the nearest glyph row by an amount that grows with
    severity, so occlusion is monotone in severity.
    """
    area = severity * _sign_area(spec) / 2
    x0, y0, x1, y1 = _legend_box(spec)
    width = (x1 - x0) * rng.uniform(0.8, 1.1)
    height = area / width
    cx = (x0 + x1) / 2 + rng.uniform(-0.05, 0.05) * (x1 - x0)
    out = []
    for color, above in zip(colors, (True, False)):
        reach = -_clearance(spec) if color == spec.legend_color else _bite(spec, severity, 0.16)
        if above:
            rect = (cx - width / 2, y0 + reach - height, cx + width / 2, y0 + reach)
        else:
            rect = (cx - width / 2, y1 - reach, cx + width / 2, y1 - reach + height)
        out.append(Sticker(rect, color, severity / 2))
    return out


def art_layout(spec: SignSpec, severity: float, rng: np.random.Generator) -> list[Sticker]:
    """Four small rectangles, alternating black and white, around the legend."""
    area = severity * _sign_area(spec) / 4
    x0, y0, x1, y1 = _legend_box(spec)
    side_w = math.sqrt(area * 2)
    side_h = area / side_w
    out = []
    for k, (fx, above) in enumerate([(0.2, True), (0.75, True), (0.3, False), (0.8, False)]):
        color = "black" if k % 2 == 0 else "white"
        cx = x0 + (x1 - x0) * (fx + rng.uniform(-0.08, 0.08))
        if color == spec.legend_color:
            reach = -_clearance(spec) - rng.uniform(0, 4)
        else:
            reach = _bite(spec, float(rng.uniform(0, 1)), 1.0)
        if above:
            rect = (cx - side_w / 2, y0 + reach - side_h, cx + side_w / 2, y0 + reach)
        else:
            rect = (cx - side_w / 2, y1 - reach, cx + side_w / 2, y1 - reach + side_h)
        out.append(Sticker(rect, color, severity / 4))
    return out


def stain_layout(spec: SignSpec, severity: float, rng: np.random.Generator) -> list[Stain]:
    """One to three translucent elliptical stains above or below the legend.

    Each stain reaches into the legend by at most the same shallow bite as
    the dark stickers, so most glyph pixels stay clear.
    """
    n = int(rng.integers(1, 4))
    area = severity * _sign_area(spec) / n
    x0, y0, x1, y1 = _legend_box(spec)
    out = []
    for k in range(n):
        ratio = rng.uniform(1.2, 2.0)
        b = math.sqrt(area / (math.pi * ratio))
        a = b * ratio
        theta = float(rng.uniform(-20, 20))
        t = math.radians(theta)
        ext = math.sqrt((a * math.sin(t)) ** 2 + (b * math.cos(t)) ** 2)
        reach = _bite(spec, float(rng.uniform(0, 1)), 1.0) if rng.uniform() < 0.7 else -float(rng.uniform(1, 8))
        cy = (y0 + reach - ext) if k % 2 == 0 else (y1 - reach + ext)
        cx = (x0 + x1) / 2 + rng.uniform(-0.6, 0.6) * (x1 - x0)
        color = ["black", "yellow", "green", "white", "blue"][int(rng.integers(0, 5))]
        out.append(Stain((cx, cy), (a, b), color, float(rng.uniform(0.2, 0.45)), theta, severity / n))
    return out


def attack(spec: SignSpec, variant: str, rng: np.random.Generator) -> list:
    """Perturbation list for one attack variant (empty for ``base``)."""
    if variant == "base":
        return []
    if variant == "rp2_subtle":
        return [SubtleNoise(int(rng.integers(4, 9)), int(rng.integers(0, 2**31)))]
    if variant == "rp2_graffiti":
        colors = ("black", "white") if rng.uniform() < 0.5 else ("white", "black")
        return graffiti_layout(spec, float(rng.uniform(0.04, 0.16)), rng, colors)
    if variant == "rp2_art":
        return art_layout(spec, float(rng.uniform(0.02, 0.06)), rng)
    if variant in ("advcam", "advcam_stain"):
        return stain_layout(spec, float(rng.uniform(0.05, 0.15)), rng)
    raise ValueError(f"unknown variant {variant!r}")


# --------------------------------------------------------------------------
# datasets

@dataclass
class DatasetConfig:
    positives: int = 20
    negatives: int = 20
    variant: str = "base"
    scale: int = 120
    scale_jitter: float = 0.1
    max_rotation: float = 10.0
    jitter: int = 6
    prefix: str = "s"


NEGATIVE_KINDS = ("speed30", "speed45", "speed60", "yield", "warning", "info_p", "info_h")


@dataclass
class Item:
    spec: SignSpec
    raster: Raster
    label: str  # "stop" or "other"
    variant: str = "base"
    perturbations: list = field(default_factory=list)

    @property
    def occlusion(self) -> float:
        return self.raster.occlusion


def stop_spec(sign_id: str, rotation=0.0, scale=120, jitter=0, jitter_seed=0) -> SignSpec:
    return SignSpec(sign_id, "octagon", "red", "white", Word("STOP"), "white", rotation, scale, jitter,
                    jitter_seed)


def negative_spec(kind: str, sign_id: str, rotation=0.0, scale=120, jitter=0, jitter_seed=0) -> SignSpec:
    common = dict(rotation_deg=rotation, scale=scale, jitter=jitter, jitter_seed=jitter_seed)
    if kind.startswith("speed"):
        return SignSpec(sign_id, "circle", "white", "red", Number(int(kind[5:])), "black", **common)
    if kind == "yield":
        return SignSpec(sign_id, "triangle", "white", "red", None, "red", **common)
    if kind == "warning":
        return SignSpec(sign_id, "diamond", "yellow", "black", None, "black", **common)
    if kind == "info_p":
        return SignSpec(sign_id, "rectangle", "blue", "white", Word("P"), "white", **common)
    if kind == "info_h":
        return SignSpec(sign_id, "rectangle", "blue", "white", Word("H"), "white", **common)
    raise ValueError(f"unknown negative kind {kind!r}")


def generate_dataset(config: DatasetConfig, seed: int) -> list[Item]:
    """Deterministic labelled corpus; positives first, then negatives.

    Attack variants perturb the positives only; negatives stay clean.
    """
    if config.positives < 0 or config.negatives < 0:
        raise ValueError("counts must be >= 0")
    if config.variant not in VARIANTS and config.variant != "advcam_stain":
        raise ValueError(f"unknown variant {config.variant!r}")
    rng = np.random.default_rng(seed)
    items = []
    total = config.positives + config.negatives
    width = max(2, len(str(total)))
    for i in range(total):
        sign_id = f"{config.prefix}{i + 1:0{width}d}"
        rotation = round(float(rng.uniform(-config.max_rotation, config.max_rotation)), 2)
        scale = int(round(config.scale * (1 + rng.uniform(-config.scale_jitter, config.scale_jitter))))
        jseed = int(rng.integers(0, 2**31))
        if i < config.positives:
            spec = stop_spec(sign_id, rotation, scale, config.jitter, jseed)
            label = "stop"
        else:
            kind = NEGATIVE_KINDS[(i - config.positives) % len(NEGATIVE_KINDS)]
            spec = negative_spec(kind, sign_id, rotation, scale, config.jitter, jseed)
            label = "other"
        raster = render(spec)
        perts = []
        if label == "stop" and config.variant != "base":
            perts = attack(spec, config.variant, rng)
            raster = perturb(raster, perts, seed=jseed)
        items.append(Item(spec, raster, label, config.variant, perts))
    return items


def perturbation_to_dict(p) -> dict:
    d = {"kind": type(p).__name__}
    for k, v in p.__dict__.items():
        d[k] = list(v) if isinstance(v, tuple) else v
    return d


def write_dataset(items: list[Item], out_dir) -> list[dict]:
    """Write one PPM per item plus ``manifest.json``; returns the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = []
    for it in items:
        fname = f"{it.spec.sign_id}.ppm"
        it.raster.save(os.path.join(out_dir, fname))
        manifest.append({"sign_id": it.spec.sign_id, "label": it.label, "variant": it.variant,
                         "file": fname, "occlusion": round(it.occlusion, 6), "spec": it.spec.to_dict(),
                         "perturbations": [perturbation_to_dict(p) for p in it.perturbations]})
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest


def read_manifest(path) -> list[dict]:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, list) or any("sign_id" not in e or "file" not in e for e in data):
        raise ValueError(f"{path}: manifest must be a list of entries with sign_id and file")
    return data

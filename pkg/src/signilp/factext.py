"""Raster to logical facts: colour masks, outline shape and legend reading."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np
from scipy import ndimage

from . import contour
from .font import FONT, GLYPH_COLS, GLYPH_ROWS, GlyphFont
from .logic import Atom, Const

AREA_THRESHOLD = 0.02
ACCEPT_BITS = 26
DEFAULT_LEXICON = ("stop", "yield", "school", "parking")
SCHEMA = ("color", "shape", "has_word", "closely_match", "number", "digits")
_EIGHT = np.ones((3, 3), dtype=bool)


class EmptyMask(ValueError):
    pass


def load_color_boxes(path=None) -> dict:
    if path is None:
        text = resources.files("signilp").joinpath("data/colors.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return json.loads(text)


COLOR_BOXES = load_color_boxes()


@dataclass
class ColorMask:
    color_name: str
    mask: np.ndarray = field(repr=False)
    area_fraction: float


@dataclass(frozen=True)
class ContourPoly:
    vertices: tuple[tuple[float, float], ...]
    source_color: str


@dataclass(frozen=True)
class Token:
    text: str
    value: Optional[int] = None  # set for all-digit tokens
    scores: tuple[int, ...] = ()
    raw: str = ""

    @property
    def is_number(self) -> bool:
        return self.value is not None


@dataclass
class FactSet:
    sign_id: str
    facts: list[Atom]

    def __iter__(self):
        return iter(self.facts)

    def __len__(self):
        return len(self.facts)


# --------------------------------------------------------------------------
# colour

def to_hsv(pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hue in degrees [0, 360), saturation and value in [0, 1]."""
    rgb = pixels.astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    c = mx - mn
    safe = np.where(c == 0, 1.0, c)
    h = np.where(mx == r, ((g - b) / safe) % 6,
                 np.where(mx == g, (b - r) / safe + 2, (r - g) / safe + 4)) * 60.0
    h = np.where(c == 0, 0.0, h)
    s = np.where(mx == 0, 0.0, c / np.where(mx == 0, 1.0, mx))
    return h, s, mx


def raw_color_masks(pixels: np.ndarray, boxes: Optional[dict] = None) -> dict[str, np.ndarray]:
    """Per-colour membership in its HSV box, before any clean-up."""
    boxes = boxes or COLOR_BOXES
    h, s, v = to_hsv(pixels)
    out = {}
    for name, box in boxes.items():
        in_hue = np.zeros(h.shape, dtype=bool)
        for lo, hi in box["hue"]:
            in_hue |= (h >= lo) & (h <= hi)
        out[name] = (in_hue & (s >= box["sat"][0]) & (s <= box["sat"][1])
                     & (v >= box["val"][0]) & (v <= box["val"][1]))
    return out


def _open_close(mask: np.ndarray) -> np.ndarray:
    # edge padding keeps regions touching the frame from being eroded away
    p = np.pad(mask, 2, mode="edge")
    p = ndimage.binary_dilation(ndimage.binary_erosion(p, _EIGHT), _EIGHT)
    p = ndimage.binary_erosion(ndimage.binary_dilation(p, _EIGHT), _EIGHT)
    return p[2:-2, 2:-2]


def classify_colors(raster, boxes: Optional[dict] = None,
                    threshold: float = AREA_THRESHOLD) -> list[ColorMask]:
    """Masks (opened then closed with a 3x3 element) for colours covering >= threshold."""
    pixels = raster.pixels
    total = pixels.shape[0] * pixels.shape[1]
    out = []
    for name, raw in raw_color_masks(pixels, boxes).items():
        m = _open_close(raw)
        frac = float(m.sum()) / total
        if frac >= threshold:
            out.append(ColorMask(name, m, frac))
    return out


# --------------------------------------------------------------------------
# shape

def largest_region(mask: np.ndarray) -> np.ndarray:
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        raise EmptyMask("mask has no set pixels")
    sizes = np.bincount(labels.ravel())[1:]
    return labels == (int(np.argmax(sizes)) + 1)


def outline(mask: ColorMask, epsilon_frac: float = 0.02) -> tuple[ContourPoly, float]:
    """Simplified outer boundary of the largest region and its radius ratio."""
    region = largest_region(mask.mask)
    boundary = contour.trace_boundary(region)
    if len(boundary) < 3:
        return ContourPoly(tuple((float(x), float(y)) for x, y in boundary), mask.color_name), 1.0
    eps = epsilon_frac * contour.perimeter(boundary)
    poly = contour.simplify_closed(boundary, eps)
    return ContourPoly(tuple(poly), mask.color_name), contour.radius_ratio(boundary)


def detect_shape(mask: ColorMask, epsilon_frac: float = 0.02, circle_ratio: float = 1.05) -> str:
    """Name of the outline shape of the largest connected region in ``mask``."""
    poly, ratio = outline(mask, epsilon_frac)
    n = len(poly.vertices)
    if n < 3:
        return "unknown"
    if ratio <= circle_ratio:
        return "circle"
    if n == 3:
        return "triangle"
    if n == 4:
        near_axis = all(min(a % 90, 90 - a % 90) <= 22.5 for a in contour.edge_angles(list(poly.vertices)))
        return "rectangle" if near_axis else "diamond"
    if n == 8:
        return "octagon"
    if n > 8:
        return "circle"
    return "unknown"


# --------------------------------------------------------------------------
# legend

def _sign_region(pixels: np.ndarray, masks: dict) -> np.ndarray:
    any_color = np.zeros(pixels.shape[:2], dtype=bool)
    for m in masks.values():
        any_color |= m
    if not any_color.any():
        return any_color
    return ndimage.binary_fill_holes(largest_region(any_color))


def _ink_candidates(mask: np.ndarray, region: np.ndarray) -> np.ndarray:
    """Pixels of one colour inside the sign, minus components too big to be glyphs."""
    m = mask & region
    labels, n = ndimage.label(m, structure=_EIGHT)
    if n == 0:
        return m
    ys, xs = np.nonzero(region)
    rh, rw = ys.max() - ys.min() + 1, xs.max() - xs.min() + 1
    keep = np.zeros(n + 1, dtype=bool)
    for i, sl in enumerate(ndimage.find_objects(labels), start=1):
        h = sl[0].stop - sl[0].start
        w = sl[1].stop - sl[1].start
        keep[i] = h <= 0.5 * rh and w <= 0.8 * rw
    return keep[labels]


def _run_lengths(ink: np.ndarray) -> Counter:
    runs: Counter = Counter()
    for grid in (ink, ink.T):
        padded = np.pad(grid.astype(np.int8), ((0, 0), (1, 1)))
        d = np.diff(padded, axis=1)
        for r in range(grid.shape[0]):
            starts = np.nonzero(d[r] == 1)[0]
            ends = np.nonzero(d[r] == -1)[0]
            runs.update((ends - starts).tolist())
    return runs


def _cell_means(ink: np.ndarray, u: int) -> np.ndarray:
    """Mean ink over the u-by-u block whose top-left corner is each pixel."""
    s = np.pad(ink.astype(np.int32), ((1, 0), (1, 0))).cumsum(0).cumsum(1)
    h, w = ink.shape
    return (s[u:h + 1, u:w + 1] - s[:h + 1 - u, u:w + 1] - s[u:h + 1, :w + 1 - u]
            + s[:h + 1 - u, :w + 1 - u]) / float(u * u)


@dataclass(frozen=True)
class _Hit:
    x: int
    y: int
    char: str
    score: int
    letter: tuple[str, int] = ("", 0)  # best letter and its score
    digit: tuple[str, int] = ("", 0)  # best digit and its score


def strip_thick(ink: np.ndarray, u: int) -> np.ndarray:
    """Drop ink blobs that hold a (2u-1)-pixel solid square.

    No glyph has a solid 2x2 block of cells, so such blobs are stickers or
    fills rather than strokes.
    """
    k = 2 * u - 1
    if k < 2:
        return ink
    # a square element is separable: a row pass then a column pass
    row, col = np.ones((1, k), dtype=bool), np.ones((k, 1), dtype=bool)
    core = ndimage.binary_erosion(ndimage.binary_erosion(ink, row), col)
    if not core.any():
        return ink
    solid = ndimage.binary_dilation(ndimage.binary_dilation(core, row), col)
    return ink & ~solid


def match_glyphs(ink: np.ndarray, u: int, font: GlyphFont = FONT, accept: int = ACCEPT_BITS) -> list[_Hit]:
    """Character hits of cell size ``u`` after greedy non-maximum suppression.

    Each window is sampled as a 5x7 grid of u-by-u cells (a cell is set when
    at least half its pixels are ink) and scored by bit agreement.
    """
    ys, xs = np.nonzero(ink)
    if len(ys) == 0 or u < 1:
        return []
    chars, glyphs = font.stack()
    gw, gh = GLYPH_COLS * u, GLYPH_ROWS * u
    y_lo, y_hi = max(0, ys.min() - gh + 1), min(ink.shape[0] - gh, ys.max())
    x_lo, x_hi = max(0, xs.min() - gw + 1), min(ink.shape[1] - gw, xs.max())
    if y_hi < y_lo or x_hi < x_lo:
        return []
    means = _cell_means(ink, u)
    py, px = np.mgrid[y_lo:y_hi + 1, x_lo:x_hi + 1]
    py, px = py.ravel(), px.ravel()
    rr, cc = np.mgrid[0:GLYPH_ROWS, 0:GLYPH_COLS]
    rr, cc = rr.ravel() * u, cc.ravel() * u
    bits = means[py[:, None] + rr[None, :], px[:, None] + cc[None, :]] >= 0.5
    g = glyphs.reshape(len(chars), -1).astype(np.float32)
    b = bits.astype(np.float32)
    # agreement = cells - hamming distance, via one float matmul
    agree = (GLYPH_ROWS * GLYPH_COLS - b.sum(1)[:, None] - g.sum(1)[None, :] + 2 * (b @ g.T)).round()
    agree = agree.astype(np.int32)
    best = agree.argmax(axis=1)
    score = agree[np.arange(len(best)), best]
    is_digit = np.array([c.isdigit() for c in chars])
    letters = np.where(~is_digit)[0]
    digits = np.where(is_digit)[0]
    ok = np.nonzero(score >= accept)[0]
    if len(ok) == 0:
        return []
    order = ok[np.lexsort((px[ok], py[ok], -score[ok]))]
    cy, cx = py[order], px[order]
    alive = np.ones(len(order), dtype=bool)
    hits: list[_Hit] = []
    while alive.any():
        k = int(np.argmax(alive))
        i = order[k]
        y, x = int(cy[k]), int(cx[k])
        alive &= ~((np.abs(cx - x) < gw) & (np.abs(cy - y) < gh))
        li = letters[int(agree[i, letters].argmax())]
        di = digits[int(agree[i, digits].argmax())]
        hits.append(_Hit(x, y, chars[int(best[i])], int(score[i]),
                         (chars[li], int(agree[i, li])), (chars[di], int(agree[i, di]))))
    return hits


def explained_ink(ink: np.ndarray, hits: list[_Hit], u: int, font: GlyphFont = FONT) -> int:
    """Pixel agreement of the hits' templates with the ink.

    Ink under a stroke counts +1; ink in a blank cell and a stroke pixel
    without ink each count -1.
    """
    total = 0
    for h in hits:
        glyph = np.kron(font.bitmap(h.char), np.ones((u, u), dtype=bool))
        win = ink[h.y:h.y + glyph.shape[0], h.x:h.x + glyph.shape[1]]
        total += int((win & glyph).sum()) - int((win & ~glyph).sum()) - int((~win & glyph).sum())
    return total


def _best_line(hits: list[_Hit], u: int, ink: np.ndarray, font: GlyphFont = FONT) -> list[_Hit]:
    lines: list[list[_Hit]] = []
    for h in sorted(hits, key=lambda h: (h.y, h.x)):
        for line in lines:
            if abs(h.y - line[0].y) <= u:
                line.append(h)
                break
        else:
            lines.append([h])
    if not lines:
        return []
    best = max(lines, key=lambda ln: (explained_ink(ink, ln, u, font), len(ln), -ln[0].y))
    return sorted(best, key=lambda h: h.x)


def _split_alnum(text: str) -> list[str]:
    parts, cur = [], ""
    for ch in text:
        if cur and cur[-1].isdigit() != ch.isdigit():
            parts.append(cur)
            cur = ""
        cur += ch
    if cur:
        parts.append(cur)
    return parts


def _resolve(group: list[_Hit], accept: int = ACCEPT_BITS) -> list[tuple[str, int]]:
    """Re-read ambiguous characters in the majority class of their group."""
    n_digits = sum(h.char.isdigit() for h in group)
    if 2 * n_digits > len(group):
        alt = [h.digit for h in group]
    elif 2 * n_digits < len(group):
        alt = [h.letter for h in group]
    else:
        return [(h.char, h.score) for h in group]
    return [a if a[1] >= accept else (h.char, h.score) for h, a in zip(group, alt)]


def _tokens(line: list[_Hit], u: int) -> list[Token]:
    pitch = (GLYPH_COLS + 1) * u
    groups: list[list[_Hit]] = []
    gaps: list[list[int]] = []
    for h in line:
        if groups:
            slots = int(round((h.x - groups[-1][-1].x) / pitch))
            if slots <= 2:
                gaps[-1].append(max(0, slots - 1))
                groups[-1].append(h)
                continue
        groups.append([h])
        gaps.append([0])
    out = []
    for grp, gap in zip(groups, gaps):
        resolved = _resolve(grp)
        raw = "".join("?" * g + c for g, (c, _) in zip(gap, resolved))
        text = "".join(c for c, _ in resolved)
        scores = [sc for _, sc in resolved]
        pos = 0
        for part in _split_alnum(text):
            sc = tuple(scores[pos:pos + len(part)])
            pos += len(part)
            value = int(part) if part.isdigit() else None
            out.append(Token(part, value, sc, raw))
    return out


def cell_sizes(region: np.ndarray) -> range:
    """Plausible glyph cell sizes for a sign region of this height."""
    ys = np.nonzero(region.any(axis=1))[0]
    h = int(ys[-1] - ys[0] + 1)
    return range(max(1, h // 100), max(1, h // 18) + 1)


def read_legend(raster, font: GlyphFont = FONT, boxes: Optional[dict] = None) -> list[Token]:
    """Tokens on the best-supported legend line.

    Every palette colour is tried as ink at every plausible cell size (glyph
    height between about 7% and 39% of the sign height).  Lines are ranked by
    how much ink their matched glyph templates explain.
    """
    pixels = raster.pixels
    masks = raw_color_masks(pixels, boxes)
    region = _sign_region(pixels, masks)
    if not region.any():
        return []
    best_key, best = None, None
    for name, m in masks.items():
        ink0 = _ink_candidates(m, region)
        if ink0.sum() < 10:
            continue
        for u in cell_sizes(region):
            ink = strip_thick(ink0, u)
            if ink.sum() < 10:
                continue
            line = _best_line(match_glyphs(ink, u, font), u, ink, font)
            if not line:
                continue
            key = (explained_ink(ink, line, u, font), len(line))
            if best_key is None or key > best_key:
                best_key, best = key, (line, u)
    if best is None:
        return []
    return _tokens(*best)


def letters_in_common(candidate: str, target: str) -> int:
    """Size of the multiset intersection of the letters of both words."""
    a = Counter(ch for ch in candidate.upper() if ch.isalpha())
    b = Counter(ch for ch in target.upper() if ch.isalpha())
    return sum((a & b).values())


# --------------------------------------------------------------------------
# facts

def dominant_mask(colors: list[ColorMask]) -> Optional[ColorMask]:
    if not colors:
        return None
    return max(colors, key=lambda m: m.area_fraction)


def emit_facts(sign_id: str, colors: list[ColorMask], shape: Optional[str], tokens: list[Token],
               lexicon=DEFAULT_LEXICON) -> FactSet:
    """Ground facts over color/shape/has_word/closely_match/number/digits."""
    sid = Const(sign_id)
    facts = [Atom("color", [sid, Const(m.color_name)]) for m in colors]
    if shape is not None and shape != "unknown":
        facts.append(Atom("shape", [sid, Const(shape)]))
    nw = nn = 0
    for tok in tokens:
        if tok.is_number:
            nn += 1
            sym = Const(f"{sign_id}_n{nn}")
            facts.append(Atom("number", [sid, sym]))
            facts.append(Atom("digits", [sym, Const(tok.value)]))
        else:
            nw += 1
            sym = Const(f"{sign_id}_w{nw}")
            facts.append(Atom("has_word", [sid, sym]))
            for word in lexicon:
                if letters_in_common(tok.text, word) >= 3:
                    facts.append(Atom("closely_match", [sym, Const(word)]))
    return FactSet(sign_id, facts)


def extract(raster, sign_id: str, lexicon=DEFAULT_LEXICON, font: GlyphFont = FONT,
            boxes: Optional[dict] = None, epsilon_frac: float = 0.02) -> FactSet:
    """Full pipeline for one image."""
    colors = classify_colors(raster, boxes)
    dom = dominant_mask(colors)
    shape = detect_shape(dom, epsilon_frac) if dom is not None else None
    tokens = read_legend(raster, font, boxes)
    return emit_facts(sign_id, colors, shape, tokens, lexicon)

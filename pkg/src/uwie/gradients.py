"""Central-difference gradient diagnostics for the quality-score components.

The colour, sharpness, and contrast indices are built from sorted
statistics and block extrema, so they are only piecewise smooth in any one
pixel: a finite step can swap a sort rank or change which pixel attains a
block extremum, and central differences straddling such a kink are
meaningless. The tie detection here identifies, per sampled pixel and
channel, whether a perturbation of +/- h provably keeps every sort order
and extremum identity fixed (with conservative margins, including guards
against near-kink curvature of sqrt and log terms). Step-halving
consistency is only meaningful on those tie-free samples.

Gradient angle matrices between the three components are reported as a
diagnostic; their magnitudes are recorded, never asserted.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .losses import (
    METRIC_SCALE,
    QualityWeights,
    color_index,
    contrast_index,
    luminance,
    quality_score,
    sharpness_index,
)
from .tensor import Array, as_tensor, opponent_channels, sobel_magnitude, _band_edges

COMPONENTS = ("coi", "si", "cti", "abl")
ANGLE_COMPONENTS = ("coi", "si", "cti")

# Conservative safety factor on the perturbation radius used by tie checks.
TIE_MARGIN = 2.0
# Bound on |d sobel_magnitude / d pixel| for any nearby pixel, including
# replicate-padding duplication at the borders (interior bound is 2).
SOBEL_SLOPE_BOUND = 5.0
# Richardson curvature guards: a log argument must exceed LOG_GUARD times the
# largest induced shift, and a Sobel magnitude entering an extremum must sit
# MAG_GUARD times its own possible shift away from the sqrt kink at zero,
# for the h^2 error terms to stay well under the 5% agreement budget.
LOG_GUARD = 4.0
MAG_GUARD = 16.0
SQRT_GUARD = 10.0

AGREE_REL_TOL = 0.05
AGREE_ABS_TOL = 1e-6


def component_value(img: Array, component: str, w: QualityWeights | None = None) -> float:
    """Evaluate one score component (or the full score) on a pixel image."""
    w = w or QualityWeights()
    if component == "coi":
        return color_index(img, w)[0]
    if component == "si":
        return sharpness_index(img, w)
    if component == "cti":
        return contrast_index(img, w)
    if component == "abl":
        return quality_score(img, w).score
    raise ParameterError(f"component must be one of {COMPONENTS}, got {component!r}")


def interior_pixel_mask(img: Array, h: float) -> Array:
    """Pixels whose every channel stays inside [0, 1] under a +/- h shift."""
    x = as_tensor(img)
    return np.logical_and(x >= h, x <= 1.0 - h).all(axis=0)


def sample_pixels(img: Array, count: int, h: float, seed: int = 0) -> list[tuple[int, int]]:
    """Draw up to ``count`` distinct interior pixels, deterministically."""
    if count < 1:
        raise ParameterError(f"sample count must be >= 1, got {count}")
    coords = np.argwhere(interior_pixel_mask(img, h))
    if coords.shape[0] == 0:
        raise ParameterError(
            "no interior pixels: every pixel has a channel within h of the [0, 1] bounds"
        )
    rng = np.random.default_rng(seed)
    chosen = rng.choice(coords.shape[0], size=min(count, coords.shape[0]), replace=False)
    return sorted((int(y), int(x)) for y, x in coords[chosen])


def _check_pixels(img: Array, pixels) -> list[tuple[int, int]]:
    _, h, w = img.shape
    checked = []
    for y, x in pixels:
        if not (0 <= y < h and 0 <= x < w):
            raise ParameterError(f"pixel ({y}, {x}) out of bounds for {h}x{w} image")
        checked.append((int(y), int(x)))
    return checked


def numerical_gradient(
    img: Array,
    component: str,
    pixels,
    h: float,
    w: QualityWeights | None = None,
) -> Array:
    """Central differences (f(x+h) - f(x-h)) / 2h, one row per pixel.

    Returns an (n_pixels, 3) array of per-channel estimates. Sampled
    pixels must be interior-valued so the perturbed images stay in the
    pixel domain; see :func:`sample_pixels`.
    """
    if not h > 0.0:
        raise ParameterError(f"step h must be positive, got {h}")
    x = as_tensor(img, "image")
    pts = _check_pixels(x, pixels)
    w = w or QualityWeights()
    grads = np.zeros((len(pts), x.shape[0]))
    work = x.copy()
    for i, (py, px) in enumerate(pts):
        for c in range(x.shape[0]):
            original = work[c, py, px]
            work[c, py, px] = original + h
            f_plus = component_value(work, component, w)
            work[c, py, px] = original - h
            f_minus = component_value(work, component, w)
            work[c, py, px] = original
            grads[i, c] = (f_plus - f_minus) / (2.0 * h)
    return grads


def _rank_window_stable(sorted_vals: Array, v: float, delta: float, t: int) -> bool:
    """True when shifting one element by +/- delta cannot cross a trim cut.

    The element's attainable rank range is bracketed by counting values
    below v - delta and up to v + delta; the trimmed set only changes when
    that range straddles the kept window [t, n-1-t].
    """
    n = sorted_vals.size
    lo = int(np.searchsorted(sorted_vals, v - delta, side="left"))
    hi = int(np.searchsorted(sorted_vals, v + delta, side="right")) - 1
    inside = lo >= t and hi <= n - 1 - t
    below = hi < t
    above = lo > n - 1 - t
    return inside or below or above


def _tie_free_coi(img: Array, pixels, h: float, w: QualityWeights) -> Array:
    scaled = img * METRIC_SCALE
    rg, yb = opponent_channels(scaled)
    planes = (
        (rg, (1.0, -1.0, 0.0)),
        (yb, (0.5, 0.5, -1.0)),
    )
    sorted_planes = [(np.sort(p.ravel()), p, coefs) for p, coefs in planes]
    n = rg.size
    t = int(np.floor(w.trim * n))
    _, shift, spread = color_index(img, w)
    # sqrt terms are non-smooth near zero chroma shift/spread: flag everything
    # when either sits within SQRT_GUARD of how far one pixel can move it
    # (a trimmed mean moves by at most delta/kept, the variance sum by
    # roughly 4*range*delta/n)
    delta = TIE_MARGIN * h * METRIC_SCALE
    move_shift = np.sqrt(2.0) * delta / max(n - 2 * t, 1)
    move_spread_sq = 4.0 * METRIC_SCALE * delta / n
    degenerate = shift < SQRT_GUARD * move_shift or spread**2 < SQRT_GUARD * move_spread_sq
    ok = np.ones((len(pixels), 3), dtype=bool)
    for i, (py, pxl) in enumerate(pixels):
        for c in range(3):
            if degenerate:
                ok[i, c] = False
                continue
            for sorted_vals, plane, coefs in sorted_planes:
                kappa = coefs[c]
                if kappa == 0.0:
                    continue
                delta = TIE_MARGIN * h * METRIC_SCALE * abs(kappa)
                if not _rank_window_stable(sorted_vals, plane[py, pxl], delta, t):
                    ok[i, c] = False
                    break
    return ok


def _block_index_maps(shape: tuple[int, int], grid: tuple[int, int]):
    rows = np.empty(shape[0], dtype=int)
    for bi, (r0, r1) in enumerate(_band_edges(shape[0], grid[0])):
        rows[r0:r1] = bi
    cols = np.empty(shape[1], dtype=int)
    for bj, (c0, c1) in enumerate(_band_edges(shape[1], grid[1])):
        cols[c0:c1] = bj
    return rows, cols


def _extremum_stable(
    tile: Array, moved: dict[tuple[int, int], float], side: str
) -> tuple[bool, tuple[int, int] | None]:
    """Can the arg-extremum of a tile change when ``moved`` entries shift?

    ``moved`` maps tile coordinates to their maximum absolute shift. The
    identity is stable when the unique current extremum, after its own
    worst-case shift, still beats every other entry after theirs. Returns
    the stability flag and the extremum position (when unique).
    """
    sign = 1.0 if side == "max" else -1.0
    vals = sign * tile
    best = float(vals.max())
    best_positions = np.argwhere(vals == best)
    if len(best_positions) > 1:
        return False, None
    by, bx = (int(v) for v in best_positions[0])
    best_delta = moved.get((by, bx), 0.0)
    others = vals.copy()
    others[by, bx] = -np.inf
    for (my, mx), d in moved.items():
        if (my, mx) != (by, bx):
            others[my, mx] += d
    return best - best_delta > float(others.max()), (by, bx)


def _tie_free_cti(img: Array, pixels, h: float, w: QualityWeights) -> Array:
    luma = luminance(img) * METRIC_SCALE
    rows, cols = _block_index_maps(luma.shape, w.cti_blocks)
    row_edges = _band_edges(luma.shape[0], w.cti_blocks[0])
    col_edges = _band_edges(luma.shape[1], w.cti_blocks[1])
    ok = np.ones((len(pixels), 3), dtype=bool)
    for i, (py, pxl) in enumerate(pixels):
        r0, r1 = row_edges[rows[py]]
        c0, c1 = col_edges[cols[pxl]]
        tile = luma[r0:r1, c0:c1]
        mx, mn = float(tile.max()), float(tile.min())
        v = luma[py, pxl]
        for c in range(3):
            lw = w.channel_weights[c]
            if lw == 0.0:
                continue
            delta = TIE_MARGIN * h * METRIC_SCALE * lw
            if v <= mx - delta and v >= mn + delta:
                continue  # strictly interior: local derivative is exactly 0
            moved = {(py - r0, pxl - c0): delta}
            stable_max, _ = _extremum_stable(tile, moved, "max")
            stable_min, _ = _extremum_stable(tile, moved, "min")
            if not (stable_max and stable_min):
                ok[i, c] = False
            elif mx - mn <= max(w.epsilon, LOG_GUARD * delta):
                # near the zero-contribution branch, where log(top) is too curved
                ok[i, c] = False
    return ok


def _tie_free_si(img: Array, pixels, h: float, w: QualityWeights) -> Array:
    scaled = img * METRIC_SCALE
    ok = np.ones((len(pixels), 3), dtype=bool)
    height, width = scaled.shape[1], scaled.shape[2]
    row_edges = _band_edges(height, w.eme_blocks[0])
    col_edges = _band_edges(width, w.eme_blocks[1])
    rows, cols = _block_index_maps((height, width), w.eme_blocks)
    delta_pix = TIE_MARGIN * h * METRIC_SCALE
    mag_floor = MAG_GUARD * SOBEL_SLOPE_BOUND * delta_pix
    for c in range(3):
        plane = scaled[c]
        mag = sobel_magnitude(plane)
        edge = mag * plane
        for i, (py, pxl) in enumerate(pixels):
            on_border = py in (0, height - 1) or pxl in (0, width - 1)
            # every edge-map entry within the 3x3 Sobel support can move
            affected: dict[tuple[int, int], float] = {}
            for qy in range(max(0, py - 1), min(height, py + 2)):
                for qx in range(max(0, pxl - 1), min(width, pxl + 2)):
                    slope = SOBEL_SLOPE_BOUND * plane[qy, qx]
                    if (qy, qx) == (py, pxl):
                        slope += mag[qy, qx]
                    affected[(qy, qx)] = slope * delta_pix
            touched = {(rows[qy], cols[qx]) for qy, qx in affected}
            for bi, bj in touched:
                r0, r1 = row_edges[bi]
                c0, c1 = col_edges[bj]
                tile = edge[r0:r1, c0:c1]
                moved = {
                    (qy - r0, qx - c0): d
                    for (qy, qx), d in affected.items()
                    if r0 <= qy < r1 and c0 <= qx < c1
                }
                stable = True
                for side in ("max", "min"):
                    is_stable, arg = _extremum_stable(tile, moved, side)
                    if not is_stable:
                        stable = False
                        break
                    gy, gx = arg[0] + r0, arg[1] + c0
                    if (gy, gx) in affected:
                        # an affected extremum rides on the Sobel magnitude,
                        # whose sqrt has a kink at zero; the perturbed pixel's
                        # own magnitude is only involved at replicate borders
                        if (gy, gx) != (py, pxl) or on_border:
                            if mag[gy, gx] <= mag_floor:
                                stable = False
                                break
                        if side == "min":
                            worst = moved[(arg[0], arg[1])]
                            if float(tile.min()) + w.epsilon <= LOG_GUARD * worst:
                                stable = False
                                break
                if not stable:
                    ok[i, c] = False
                    break
    return ok


def tie_free_mask(
    img: Array,
    pixels,
    h: float,
    w: QualityWeights | None = None,
    component: str = "abl",
) -> Array:
    """Per (pixel, channel) flag: is the component provably smooth there?

    ``h`` should be the largest step that will be used; margins inside the
    checks cover the smaller steps. For the full score the mask is the
    conjunction of the three component masks.
    """
    x = as_tensor(img, "image")
    pts = _check_pixels(x, pixels)
    w = w or QualityWeights()
    if component == "coi":
        return _tie_free_coi(x, pts, h, w)
    if component == "si":
        return _tie_free_si(x, pts, h, w)
    if component == "cti":
        return _tie_free_cti(x, pts, h, w)
    if component == "abl":
        return (
            _tie_free_coi(x, pts, h, w)
            & _tie_free_si(x, pts, h, w)
            & _tie_free_cti(x, pts, h, w)
        )
    raise ParameterError(f"component must be one of {COMPONENTS}, got {component!r}")


def estimates_agree(g1: Array, g2: Array) -> Array:
    """Elementwise 5%-relative (or tiny-absolute) agreement of two estimates."""
    diff = np.abs(g1 - g2)
    scale = np.maximum(np.abs(g1), np.abs(g2))
    return (diff <= AGREE_REL_TOL * scale) | (diff <= AGREE_ABS_TOL)


def consistency_ratios(g1: Array, g2: Array) -> Array:
    """Relative step-halving mismatch per sample: |g1-g2| / max(|g1|, |g2|).

    Elements where both estimates are below the absolute-agreement floor
    report 0 (two vanishing gradients are consistent).
    """
    diff = np.abs(g1 - g2)
    scale = np.maximum(np.abs(g1), np.abs(g2))
    out = np.zeros_like(diff)
    nonzero = scale > AGREE_ABS_TOL
    out[nonzero] = diff[nonzero] / scale[nonzero]
    return out


def gradient_angle_matrix(
    img: Array,
    w: QualityWeights | None = None,
    pixels=None,
    h: float = 1e-3,
) -> Array:
    """Pairwise cosine similarities of the coi/si/cti sampled gradients.

    Gradients are flattened over (pixel, channel); a zero-norm gradient
    makes its pairs undefined, reported as NaN sentinels rather than an
    error. The diagonal is 1 for any nonzero gradient.
    """
    w = w or QualityWeights()
    if pixels is None:
        pixels = sample_pixels(img, 8, h)
    vecs = [
        numerical_gradient(img, comp, pixels, h, w).ravel() for comp in ANGLE_COMPONENTS
    ]
    norms = [float(np.linalg.norm(v)) for v in vecs]
    out = np.full((3, 3), np.nan)
    for i in range(3):
        for j in range(3):
            if norms[i] > 0.0 and norms[j] > 0.0:
                out[i, j] = float(np.dot(vecs[i], vecs[j]) / (norms[i] * norms[j]))
    return out


def gradient_report(
    img: Array,
    component: str = "abl",
    samples: int = 8,
    h: float = 1e-3,
    w: QualityWeights | None = None,
    seed: int = 0,
) -> dict:
    """Full diagnostic bundle: gradients at h and h/10, ties, angles.

    The returned dict is JSON-serializable (NaN sentinels become None) and
    drives the ``gradcheck`` CLI command.
    """
    w = w or QualityWeights()
    h2 = h / 10.0
    pixels = sample_pixels(img, samples, h, seed)
    g1 = numerical_gradient(img, component, pixels, h, w)
    g2 = numerical_gradient(img, component, pixels, h2, w)
    ties = tie_free_mask(img, pixels, h * 1.01, w, component)
    agree = estimates_agree(g1, g2)
    ratios = consistency_ratios(g1, g2)
    finite = bool(np.isfinite(g1).all() and np.isfinite(g2).all())
    tie_free_agree = bool(agree[ties].all()) if ties.any() else True
    angles = gradient_angle_matrix(img, w, pixels, h)
    return {
        "component": component,
        "h": [h, h2],
        "pixels": [list(p) for p in pixels],
        "gradients_h1": g1.tolist(),
        "gradients_h2": g2.tolist(),
        "tie_free": ties.tolist(),
        "tie_free_count": int(ties.sum()),
        "consistency_ratios": ratios.tolist(),
        "consistency_pass": tie_free_agree,
        "angle_matrix": [
            [None if np.isnan(v) else float(v) for v in row] for row in angles
        ],
        "finite": finite,
        "pass": finite and tie_free_agree,
    }

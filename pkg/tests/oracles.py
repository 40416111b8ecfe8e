"""Independent brute-force oracles.

Everything here is written as plain loops over the mathematical
definitions, deliberately sharing no code path with the package (only
numpy container plumbing). Test modules compare the optimized
implementations against these.
"""

import math

import numpy as np


def conv2d_loops(x, weights, bias, padding="same"):
    """Direct quadruple-loop cross-correlation."""
    c_out, c_in, kh, kw = weights.shape
    assert x.shape[0] == c_in
    if padding == "same":
        ph, pw = kh // 2, kw // 2
    else:
        ph = pw = 0
    xp = np.zeros((c_in, x.shape[1] + 2 * ph, x.shape[2] + 2 * pw))
    xp[:, ph : ph + x.shape[1], pw : pw + x.shape[2]] = x
    out_h = xp.shape[1] - kh + 1
    out_w = xp.shape[2] - kw + 1
    out = np.zeros((c_out, out_h, out_w))
    for o in range(c_out):
        for y in range(out_h):
            for z in range(out_w):
                acc = bias[o]
                for i in range(c_in):
                    for u in range(kh):
                        for v in range(kw):
                            acc += weights[o, i, u, v] * xp[i, y + u, z + v]
                out[o, y, z] = acc
    return out


def maxpool2_loops(x):
    c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    out = np.empty((c, h2, w2))
    for i in range(c):
        for y in range(h2):
            for z in range(w2):
                out[i, y, z] = max(
                    x[i, 2 * y, 2 * z],
                    x[i, 2 * y, 2 * z + 1],
                    x[i, 2 * y + 1, 2 * z],
                    x[i, 2 * y + 1, 2 * z + 1],
                )
    return out


def upsample2_loops(x):
    c, h, w = x.shape
    out = np.empty((c, 2 * h, 2 * w))
    for i in range(c):
        for y in range(2 * h):
            for z in range(2 * w):
                out[i, y, z] = x[i, y // 2, z // 2]
    return out


def gaussian_blur_loops(x, omega):
    """Replicate-padded direct 2-d Gaussian: radius ceil(3*omega), normalized."""
    radius = math.ceil(3.0 * omega)
    kernel = np.empty((2 * radius + 1, 2 * radius + 1))
    for u in range(-radius, radius + 1):
        for v in range(-radius, radius + 1):
            kernel[u + radius, v + radius] = math.exp(-(u * u + v * v) / (2.0 * omega * omega))
    kernel /= kernel.sum()
    c, h, w = x.shape
    out = np.zeros_like(x)
    for i in range(c):
        for y in range(h):
            for z in range(w):
                acc = 0.0
                for u in range(-radius, radius + 1):
                    for v in range(-radius, radius + 1):
                        yy = min(max(y + u, 0), h - 1)
                        zz = min(max(z + v, 0), w - 1)
                        acc += kernel[u + radius, v + radius] * x[i, yy, zz]
                out[i, y, z] = acc
    return out


_SX = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]


def sobel_loops(plane):
    h, w = plane.shape
    out = np.zeros((h, w))
    for y in range(h):
        for z in range(w):
            gx = 0.0
            gy = 0.0
            for u in range(3):
                for v in range(3):
                    yy = min(max(y + u - 1, 0), h - 1)
                    zz = min(max(z + v - 1, 0), w - 1)
                    gx += _SX[u][v] * plane[yy, zz]
                    gy += _SX[v][u] * plane[yy, zz]
            out[y, z] = math.sqrt(gx * gx + gy * gy)
    return out


def trimmed_mean_sorted(values, trim):
    vals = sorted(float(v) for v in np.asarray(values).ravel())
    t = int(math.floor(trim * len(vals)))
    kept = vals[t : len(vals) - t]
    return math.fsum(kept) / len(kept)


def trimmed_variance_direct(values, trim):
    vals = [float(v) for v in np.asarray(values).ravel()]
    mu = trimmed_mean_sorted(vals, trim)
    return math.fsum((v - mu) ** 2 for v in vals) / len(vals)


def channel_stats_twopass(x):
    means, stds = [], []
    for plane in x:
        n = plane.size
        m = sum(float(v) for v in plane.ravel()) / n
        var = sum((float(v) - m) ** 2 for v in plane.ravel()) / n
        means.append(m)
        stds.append(math.sqrt(var))
    return np.array(means), np.array(stds)


def gap_sums(x):
    return np.array([sum(float(v) for v in plane.ravel()) / plane.size for plane in x])


def block_grid_edges(n, k):
    """Near-equal split with remainders on the trailing blocks."""
    base = n // k
    extra = n - base * k
    edges = []
    start = 0
    for i in range(k):
        size = base + (1 if i >= k - extra else 0)
        edges.append((start, start + size))
        start += size
    return edges


def eme_blockloop(plane, k1, k2, eps):
    total = 0.0
    for r0, r1 in block_grid_edges(plane.shape[0], k1):
        for c0, c1 in block_grid_edges(plane.shape[1], k2):
            tile = plane[r0:r1, c0:c1]
            total += math.log((tile.max() + eps) / (tile.min() + eps))
    return 2.0 / (k1 * k2) * total


def cti_blockloop(luma, k1, k2, alpha, eps):
    total = 0.0
    for r0, r1 in block_grid_edges(luma.shape[0], k1):
        for c0, c1 in block_grid_edges(luma.shape[1], k2):
            tile = luma[r0:r1, c0:c1]
            top = float(tile.max() - tile.min())
            bot = float(tile.max() + tile.min())
            if top > eps:
                ratio = top / bot
                total += alpha * ratio**alpha * math.log(ratio)
    return -total / (k1 * k2)


def coi_sort_trim_sum(img01, trim):
    """Colour index oracle on the 255-scaled opponent planes."""
    r, g, b = img01[0] * 255.0, img01[1] * 255.0, img01[2] * 255.0
    rg = (r - g).ravel()
    yb = ((r + g) / 2.0 - b).ravel()
    l = math.sqrt(trimmed_mean_sorted(rg, trim) ** 2 + trimmed_mean_sorted(yb, trim) ** 2)
    spread = math.sqrt(trimmed_variance_direct(rg, trim) + trimmed_variance_direct(yb, trim))
    return -0.027 * l + 0.159 * spread, l, spread


def psnr_direct(a, b):
    diff = (a - b).ravel()
    mse = sum(float(d) * float(d) for d in diff) / diff.size
    if mse == 0.0:
        return 100.0
    return min(100.0, 10.0 * math.log10(1.0 / mse))


def ssim_windowloop(a, b):
    """Direct sliding-window SSIM on luminance, 11x11 Gaussian, K1/K2 = 0.01/0.03."""

    def luma(img):
        return 0.299 * img[0] + 0.587 * img[1] + 0.114 * img[2]

    x, y = luma(a), luma(b)
    half = 5
    win = np.empty((11, 11))
    for u in range(11):
        for v in range(11):
            win[u, v] = math.exp(-((u - half) ** 2 + (v - half) ** 2) / (2.0 * 1.5**2))
    win /= win.sum()
    c1, c2 = 0.01**2, 0.03**2
    h, w = x.shape
    vals = []
    for yy in range(h - 10):
        for zz in range(w - 10):
            px = x[yy : yy + 11, zz : zz + 11]
            py = y[yy : yy + 11, zz : zz + 11]
            mx = float((win * px).sum())
            my = float((win * py).sum())
            vx = float((win * px * px).sum()) - mx * mx
            vy = float((win * py * py).sum()) - my * my
            cov = float((win * px * py).sum()) - mx * my
            vals.append(
                ((2 * mx * my + c1) * (2 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
            )
    return sum(vals) / len(vals)


def uciqe_pixelloop(img):
    r, g, b = img[0], img[1], img[2]
    h, w = r.shape
    chroma = np.empty((h, w))
    luma = np.empty((h, w))
    sats = []
    for y in range(h):
        for z in range(w):
            rg = r[y, z] - g[y, z]
            yb = (r[y, z] + g[y, z]) / 2.0 - b[y, z]
            chroma[y, z] = math.sqrt(rg * rg + yb * yb)
            luma[y, z] = 0.299 * r[y, z] + 0.587 * g[y, z] + 0.114 * b[y, z]
            sats.append(chroma[y, z] / (luma[y, z] + 1e-8))
    contrast = float(np.percentile(luma, 99) - np.percentile(luma, 1))
    return (
        0.4680 * float(chroma.std())
        + 0.2745 * contrast
        + 0.2576 * (sum(sats) / len(sats))
    )


def mae_loops(a, b):
    fa, fb = a.ravel(), b.ravel()
    return sum(abs(float(x) - float(y)) for x, y in zip(fa, fb)) / fa.size


def kl_monte_carlo(mu_p, sigma_p, mu_q, sigma_q, n=1_000_000, seed=99):
    """MC estimate of KL(p||q) for diagonal Gaussians via log-density ratio."""
    mu_p = np.asarray(mu_p, dtype=float)
    sigma_p = np.asarray(sigma_p, dtype=float)
    mu_q = np.asarray(mu_q, dtype=float)
    sigma_q = np.asarray(sigma_q, dtype=float)
    rng = np.random.default_rng(seed)
    x = mu_p + sigma_p * rng.standard_normal((n, mu_p.size))
    log_p = -0.5 * ((x - mu_p) / sigma_p) ** 2 - np.log(sigma_p)
    log_q = -0.5 * ((x - mu_q) / sigma_q) ** 2 - np.log(sigma_q)
    return float((log_p - log_q).sum(axis=1).mean())

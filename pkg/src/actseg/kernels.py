"""Hot numeric kernels, JIT-compiled with numba when available.

Every kernel exists in two flavours: ``<name>_py`` is the plain
interpreted implementation and ``<name>`` is the numba-compiled version
of the same function. Set ``ACTSEG_DISABLE_NUMBA=1`` (or have numba
missing) to make the public names fall back to the interpreted path.
``benchmarks/bench_kernels.py`` times both flavours side by side.
"""

from __future__ import annotations

import math
import os

import numpy as np


def _numba_disabled() -> bool:
    return os.environ.get("ACTSEG_DISABLE_NUMBA", "").strip().lower() in {
        "1", "true", "yes", "on",
    }


NUMBA_ENABLED = False
if not _numba_disabled():
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass


def _jit(fn):
    if NUMBA_ENABLED:
        return _njit(cache=True)(fn)
    return fn


def kernel_backend() -> str:
    """Name of the active kernel backend: "numba" or "numpy"."""
    return "numba" if NUMBA_ENABLED else "numpy"


# ---------------------------------------------------------------------------
# polygon scanline fill


def _fill_polygon_mask(xs, ys, width, height):
    """Even-odd scanline fill of a closed ring, evaluated at pixel centers.

    A pixel (x, y) is set when its center (x+0.5, y+0.5) lies strictly
    inside the ring under the even-odd rule. The filled set is clipped to
    the grid, so vertices may lie outside it.
    """
    mask = np.zeros((height, width), dtype=np.bool_)
    n = xs.shape[0]
    if n < 3 or width <= 0 or height <= 0:
        return mask
    ymin = ys[0]
    ymax = ys[0]
    for i in range(1, n):
        if ys[i] < ymin:
            ymin = ys[i]
        if ys[i] > ymax:
            ymax = ys[i]
    row0 = int(math.floor(ymin))
    row1 = int(math.ceil(ymax))
    if row0 < 0:
        row0 = 0
    if row1 > height - 1:
        row1 = height - 1
    xbuf = np.empty(n, dtype=np.float64)
    for row in range(row0, row1 + 1):
        sy = row + 0.5
        cnt = 0
        for i in range(n):
            j = i + 1
            if j == n:
                j = 0
            y1 = ys[i]
            y2 = ys[j]
            if (y1 > sy) != (y2 > sy):
                xbuf[cnt] = xs[i] + (sy - y1) * (xs[j] - xs[i]) / (y2 - y1)
                cnt += 1
        if cnt < 2:
            continue
        xr = np.sort(xbuf[:cnt])
        k = 0
        while k + 1 < cnt:
            # pixel centers in [a, b) are inside
            a = xr[k]
            b = xr[k + 1]
            i0 = int(math.ceil(a - 0.5))
            i1 = int(math.ceil(b - 0.5))
            if i0 < 0:
                i0 = 0
            if i1 > width:
                i1 = width
            if i1 > i0:
                mask[row, i0:i1] = True
            k += 2
    return mask


fill_polygon_mask_py = _fill_polygon_mask
fill_polygon_mask = _jit(_fill_polygon_mask)


# ---------------------------------------------------------------------------
# line drawing (outline rendering)


def _draw_line_mask(mask, x0, y0, x1, y1):
    """Bresenham segment draw onto a boolean grid, clipped to bounds."""
    h, w = mask.shape
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x = x0
    y = y0
    while True:
        if 0 <= x < w and 0 <= y < h:
            mask[y, x] = True
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
    return mask


draw_line_mask_py = _draw_line_mask
draw_line_mask = _jit(_draw_line_mask)


# ---------------------------------------------------------------------------
# 8-connected component labeling (two-pass union-find)


def _uf_find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


uf_find_py = _uf_find
_uf_find = _jit(_uf_find)


def _label_components(mask):
    """Label 8-connected components of a boolean grid.

    Returns (labels, count) where labels holds 1..count in row-major
    first-encountered order and 0 marks background.
    """
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    parent = np.zeros(h * w // 2 + 2, dtype=np.int32)
    nxt = 1
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            m = 0
            for k in range(4):
                if k == 0:
                    nb = labels[y, x - 1] if x > 0 else 0
                elif k == 1:
                    nb = labels[y - 1, x - 1] if x > 0 and y > 0 else 0
                elif k == 2:
                    nb = labels[y - 1, x] if y > 0 else 0
                else:
                    nb = labels[y - 1, x + 1] if y > 0 and x + 1 < w else 0
                if nb != 0:
                    r = _uf_find(parent, nb)
                    if m == 0 or r < m:
                        m = r
            if m == 0:
                parent[nxt] = nxt
                labels[y, x] = nxt
                nxt += 1
            else:
                labels[y, x] = m
                for k in range(4):
                    if k == 0:
                        nb = labels[y, x - 1] if x > 0 else 0
                    elif k == 1:
                        nb = labels[y - 1, x - 1] if x > 0 and y > 0 else 0
                    elif k == 2:
                        nb = labels[y - 1, x] if y > 0 else 0
                    else:
                        nb = labels[y - 1, x + 1] if y > 0 and x + 1 < w else 0
                    if nb != 0:
                        r = _uf_find(parent, nb)
                        if r != m:
                            parent[r] = m
    remap = np.zeros(nxt, dtype=np.int32)
    count = 0
    for y in range(h):
        for x in range(w):
            lab = labels[y, x]
            if lab != 0:
                r = _uf_find(parent, lab)
                if remap[r] == 0:
                    count += 1
                    remap[r] = count
                labels[y, x] = remap[r]
    return labels, count


label_components_py = _label_components
label_components = _jit(_label_components)


# ---------------------------------------------------------------------------
# boundary tracing along pixel edges (crack following)

# direction codes: 0 = +x, 1 = +y, 2 = -x, 3 = -y (y grows downward)


def _cell(mask, x, y):
    h, w = mask.shape
    if x < 0 or y < 0 or x >= w or y >= h:
        return False
    return bool(mask[y, x])


cell_py = _cell
_cell = _jit(_cell)


def _trace_outer_boundary(mask):
    """Trace the outer boundary of a pixel region as a lattice polygon.

    Walks the cracks between region and background keeping the region on
    the right, starting at the top-left corner of the topmost-leftmost
    pixel. At saddle corners the left turn is preferred, which pinches
    through diagonal contacts so an 8-connected component yields a single
    closed ring. Vertices (turn corners, integer lattice coordinates) are
    returned as an (n, 2) array of (x, y); re-rasterizing the ring under
    the pixel-center even-odd rule reproduces the region with any
    enclosed holes filled.
    """
    h, w = mask.shape
    sx = -1
    sy = -1
    for y in range(h):
        for x in range(w):
            if mask[y, x]:
                sy = y
                sx = x
                break
        if sx >= 0:
            break
    out = np.empty((4 * (h + 1) * (w + 1) + 4, 2), dtype=np.int64)
    if sx < 0:
        return out[:0]
    out[0, 0] = sx
    out[0, 1] = sy
    nv = 1
    cx = sx + 1
    cy = sy
    d = 0
    max_steps = 4 * (h + 2) * (w + 2) + 8
    steps = 0
    while not (cx == sx and cy == sy):
        steps += 1
        if steps > max_steps:
            raise RuntimeError("boundary walk failed to close")
        nd = -1
        for t in range(3):
            cand = (d + 3 + t) % 4  # try left turn, then straight, then right
            if cand == 0:
                ar = _cell(mask, cx, cy)
                al = _cell(mask, cx, cy - 1)
            elif cand == 1:
                ar = _cell(mask, cx - 1, cy)
                al = _cell(mask, cx, cy)
            elif cand == 2:
                ar = _cell(mask, cx - 1, cy - 1)
                al = _cell(mask, cx - 1, cy)
            else:
                ar = _cell(mask, cx, cy - 1)
                al = _cell(mask, cx - 1, cy - 1)
            if ar and not al:
                nd = cand
                break
        if nd < 0:
            raise RuntimeError("boundary walk left the region edge")
        if nd != d:
            out[nv, 0] = cx
            out[nv, 1] = cy
            nv += 1
            d = nd
        if d == 0:
            cx += 1
        elif d == 1:
            cy += 1
        elif d == 2:
            cx -= 1
        else:
            cy -= 1
    return out[:nv]


trace_outer_boundary_py = _trace_outer_boundary
trace_outer_boundary = _jit(_trace_outer_boundary)


# ---------------------------------------------------------------------------
# edit distance


def _levenshtein(a, b):
    """Unit-cost edit distance between two integer code sequences."""
    n = a.shape[0]
    m = b.shape[0]
    if n == 0:
        return m
    if m == 0:
        return n
    prev = np.arange(m + 1, dtype=np.int32)
    curr = np.empty(m + 1, dtype=np.int32)
    for i in range(1, n + 1):
        curr[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1] + (0 if ai == b[j - 1] else 1)
            if prev[j] + 1 < best:
                best = prev[j] + 1
            if curr[j - 1] + 1 < best:
                best = curr[j - 1] + 1
            curr[j] = best
        tmp = prev
        prev = curr
        curr = tmp
    return int(prev[m])


levenshtein_py = _levenshtein
levenshtein = _jit(_levenshtein)


def _min_window_distance(text, pattern):
    """Minimum edit distance between ``pattern`` and any substring of ``text``.

    Standard free-start/free-end alignment: the first DP row is zero and
    the answer is the minimum of the last row.
    """
    n = text.shape[0]
    m = pattern.shape[0]
    if m == 0:
        return 0
    prev = np.zeros(n + 1, dtype=np.int32)
    curr = np.empty(n + 1, dtype=np.int32)
    for i in range(1, m + 1):
        curr[0] = i
        pi = pattern[i - 1]
        for j in range(1, n + 1):
            best = prev[j - 1] + (0 if text[j - 1] == pi else 1)
            if prev[j] + 1 < best:
                best = prev[j] + 1
            if curr[j - 1] + 1 < best:
                best = curr[j - 1] + 1
            curr[j] = best
        tmp = prev
        prev = curr
        curr = tmp
    best = prev[0]
    for j in range(1, n + 1):
        if prev[j] < best:
            best = prev[j]
    return int(best)


min_window_distance_py = _min_window_distance
min_window_distance = _jit(_min_window_distance)


def encode_text(s: str) -> np.ndarray:
    """Encode a string as an int32 array of code points for the DP kernels."""
    return np.frombuffer(s.encode("utf-32-le"), dtype=np.int32).copy()


def warm_up() -> None:
    """Force-compile all kernels on tiny inputs (no-op on the numpy path)."""
    m = np.zeros((3, 3), dtype=np.bool_)
    m[1, 1] = True
    fill_polygon_mask(
        np.array([0.0, 2.0, 2.0, 0.0]), np.array([0.0, 0.0, 2.0, 2.0]), 3, 3
    )
    draw_line_mask(np.zeros((3, 3), dtype=np.bool_), 0, 0, 2, 2)
    label_components(m)
    trace_outer_boundary(m)
    levenshtein(encode_text("ab"), encode_text("ac"))
    min_window_distance(encode_text("abc"), encode_text("b"))

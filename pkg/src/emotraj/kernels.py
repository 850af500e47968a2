"""Hot inner loops, each in two flavours.

``*_nb`` functions are explicit loops compiled with numba; ``*_np`` functions
are vectorized numpy equivalents that compute the same quantities with the
same arithmetic order where that matters for tie-breaking. The public names
at the bottom of the module are bound to one or the other according to
:data:`emotraj._accel.USE_NUMBA`.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# Absolute tolerance under which two weighted stump errors count as tied.
STUMP_TIE_TOL = 1e-12

# Samples this close outside the source grid snap onto its border.
WARP_EDGE_EPS = 1e-9


# -- summed-area table ---------------------------------------------------------

@njit
def integral_table_nb(img):
    h, w = img.shape
    out = np.zeros((h + 1, w + 1), dtype=img.dtype)
    for y in range(1, h + 1):
        for x in range(1, w + 1):
            out[y, x] = img[y - 1, x - 1] + out[y, x - 1] + out[y - 1, x] - out[y - 1, x - 1]
    return out


def integral_table_np(img):
    h, w = img.shape
    out = np.zeros((h + 1, w + 1), dtype=img.dtype)
    out[1:, 1:] = np.cumsum(np.cumsum(img, axis=0), axis=1)
    return out


@njit
def rect_sums_nb(table, xs, ys, ws, hs):
    n = xs.shape[0]
    out = np.empty(n, dtype=table.dtype)
    for i in range(n):
        x0 = xs[i]
        y0 = ys[i]
        x1 = x0 + ws[i]
        y1 = y0 + hs[i]
        out[i] = table[y1, x1] - table[y0, x1] - table[y1, x0] + table[y0, x0]
    return out


def rect_sums_np(table, xs, ys, ws, hs):
    x1 = xs + ws
    y1 = ys + hs
    return table[y1, x1] - table[ys, x1] - table[y1, xs] + table[ys, xs]


# -- Haar features -------------------------------------------------------------

@njit
def haar_matrix_nb(tables, rx, ry, rw, rh, rwt):
    """Feature values for N same-size windows (origin 0,0) and F features."""
    n = tables.shape[0]
    nf, nr = rx.shape
    out = np.zeros((n, nf), dtype=np.float64)
    for i in range(n):
        t = tables[i]
        for f in range(nf):
            acc = 0.0
            for k in range(nr):
                x0 = rx[f, k]
                y0 = ry[f, k]
                x1 = x0 + rw[f, k]
                y1 = y0 + rh[f, k]
                s = t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0]
                acc = acc + rwt[f, k] * s
            out[i, f] = acc
    return out


def haar_matrix_np(tables, rx, ry, rw, rh, rwt):
    x1 = rx + rw
    y1 = ry + rh
    s = tables[:, y1, x1] - tables[:, ry, x1] - tables[:, y1, rx] + tables[:, ry, rx]
    acc = np.zeros(s.shape[:2])
    for k in range(rx.shape[1]):
        acc = acc + rwt[:, k] * s[:, :, k]
    return acc


@njit
def window_votes_nb(table, ox, oy, rx, ry, rw, rh, rwt, norm, thresholds, polarities, alphas):
    """Sum of alphas of stumps voting 'face' at every window origin."""
    npos = ox.shape[0]
    nt, nr = rx.shape
    out = np.zeros(npos, dtype=np.float64)
    for p in range(npos):
        acc = 0.0
        for t in range(nt):
            val = 0.0
            for k in range(nr):
                x0 = ox[p] + rx[t, k]
                y0 = oy[p] + ry[t, k]
                x1 = x0 + rw[t, k]
                y1 = y0 + rh[t, k]
                s = table[y1, x1] - table[y0, x1] - table[y1, x0] + table[y0, x0]
                val = val + rwt[t, k] * s
            val = val * norm[t]
            if polarities[t] * (val - thresholds[t]) > 0.0:
                acc = acc + alphas[t]
        out[p] = acc
    return out


def window_votes_np(table, ox, oy, rx, ry, rw, rh, rwt, norm, thresholds, polarities, alphas):
    acc = np.zeros(ox.shape[0])
    for t in range(rx.shape[0]):
        val = np.zeros(ox.shape[0])
        for k in range(rx.shape[1]):
            x0 = ox + rx[t, k]
            y0 = oy + ry[t, k]
            x1 = x0 + rw[t, k]
            y1 = y0 + rh[t, k]
            s = table[y1, x1] - table[y0, x1] - table[y1, x0] + table[y0, x0]
            val = val + rwt[t, k] * s
        val = val * norm[t]
        acc = acc + np.where(polarities[t] * (val - thresholds[t]) > 0.0, alphas[t], 0.0)
    return acc


# -- decision stump search -----------------------------------------------------

@njit
def best_stump_nb(sorted_vals, order, labels, weights):
    """Lowest weighted-error stump; returns (feature, split, polarity, error).

    ``split`` i means the threshold sits between sorted rows i and i+1.
    Feature is -1 when no feature has two distinct values.
    """
    n, nf = sorted_vals.shape
    wp = np.zeros(n)
    wn = np.zeros(n)
    for j in range(n):
        if labels[j] > 0:
            wp[j] = weights[j]
        else:
            wn[j] = weights[j]
    errs = np.full((nf, max(n - 1, 0), 2), np.inf)
    best = np.inf
    for f in range(nf):
        cp = np.empty(n)
        cn = np.empty(n)
        ap = 0.0
        an = 0.0
        for i in range(n):
            ap = ap + wp[order[i, f]]
            an = an + wn[order[i, f]]
            cp[i] = ap
            cn[i] = an
        tp = cp[n - 1]
        tn = cn[n - 1]
        for i in range(n - 1):
            if sorted_vals[i, f] < sorted_vals[i + 1, f]:
                e_plus = cp[i] + (tn - cn[i])
                e_minus = cn[i] + (tp - cp[i])
                errs[f, i, 0] = e_plus
                errs[f, i, 1] = e_minus
                if e_plus < best:
                    best = e_plus
                if e_minus < best:
                    best = e_minus
    if best == np.inf:
        return -1, -1, 0, np.inf
    limit = best + STUMP_TIE_TOL
    for f in range(nf):
        for i in range(n - 1):
            for s in range(2):
                if errs[f, i, s] <= limit:
                    return f, i, 1 - 2 * s, errs[f, i, s]
    return -1, -1, 0, np.inf


def best_stump_np(sorted_vals, order, labels, weights):
    n, nf = sorted_vals.shape
    if n < 2:
        return -1, -1, 0, np.inf
    wp = np.where(labels > 0, weights, 0.0)
    wn = np.where(labels > 0, 0.0, weights)
    cp = np.cumsum(wp[order], axis=0)
    cn = np.cumsum(wn[order], axis=0)
    tp = cp[-1]
    tn = cn[-1]
    valid = sorted_vals[:-1] < sorted_vals[1:]
    e_plus = np.where(valid, cp[:-1] + (tn - cn[:-1]), np.inf)
    e_minus = np.where(valid, cn[:-1] + (tp - cp[:-1]), np.inf)
    errs = np.stack([e_plus.T, e_minus.T], axis=2)  # (F, N-1, 2)
    best = errs.min()
    if best == np.inf:
        return -1, -1, 0, np.inf
    flat = int(np.argmax(errs.ravel() <= best + STUMP_TIE_TOL))
    f, i, s = np.unravel_index(flat, errs.shape)
    return int(f), int(i), 1 - 2 * int(s), float(errs[f, i, s])


# -- symmetric eigensolver -----------------------------------------------------

@njit
def jacobi_eigh_nb(mat, tol, max_sweeps):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns (eigenvalues, eigenvectors as columns, sweeps used). Stops when
    the off-diagonal Frobenius norm drops to ``tol * ||mat||_F``.
    """
    a = mat.copy()
    n = a.shape[0]
    v = np.eye(n)
    scale = np.sqrt(np.sum(a * a))
    sweeps = 0
    while sweeps < max_sweeps:
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += a[i, j] * a[i, j]
        if np.sqrt(off) <= tol * scale:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                g = 100.0 * abs(apq)
                if abs(app) + g == abs(app) and abs(aqq) + g == abs(aqq):
                    # below rounding of both diagonals; rotating would overflow theta
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    a[p, k] = a[k, p]
                    a[q, k] = a[k, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return np.diag(a).copy(), v, sweeps


def jacobi_eigh_np(mat, tol, max_sweeps):
    a = np.array(mat, dtype=np.float64, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.sqrt(np.sum(a * a))
    sweeps = 0
    while sweeps < max_sweeps:
        off = np.sum(a * a) - np.sum(np.diag(a) ** 2)
        if np.sqrt(max(off, 0.0)) <= tol * scale:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                g = 100.0 * abs(apq)
                if abs(app) + g == abs(app) and abs(aqq) + g == abs(aqq):
                    # below rounding of both diagonals; rotating would overflow theta
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                colp = a[:, p].copy()
                colq = a[:, q].copy()
                newp = c * colp - s * colq
                newq = s * colp + c * colq
                a[:, p] = newp
                a[:, q] = newq
                a[p, :] = newp
                a[q, :] = newq
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v, sweeps


# -- resampling ----------------------------------------------------------------

@njit
def warp_bilinear_nb(src, affine, out_h, out_w):
    """Sample ``src`` at ``affine @ (x, y, 1)`` for every output pixel."""
    h, w = src.shape
    out = np.zeros((out_h, out_w))
    for yo in range(out_h):
        for xo in range(out_w):
            xs = affine[0, 0] * xo + affine[0, 1] * yo + affine[0, 2]
            ys = affine[1, 0] * xo + affine[1, 1] * yo + affine[1, 2]
            if xs < 0.0 and xs >= -WARP_EDGE_EPS:
                xs = 0.0
            if xs > w - 1 and xs <= w - 1 + WARP_EDGE_EPS:
                xs = w - 1.0
            if ys < 0.0 and ys >= -WARP_EDGE_EPS:
                ys = 0.0
            if ys > h - 1 and ys <= h - 1 + WARP_EDGE_EPS:
                ys = h - 1.0
            if xs < 0.0 or xs > w - 1 or ys < 0.0 or ys > h - 1:
                continue
            x0 = int(np.floor(xs))
            y0 = int(np.floor(ys))
            if x0 > w - 2:
                x0 = max(w - 2, 0)
            if y0 > h - 2:
                y0 = max(h - 2, 0)
            x1 = min(x0 + 1, w - 1)
            y1 = min(y0 + 1, h - 1)
            fx = xs - x0
            fy = ys - y0
            top = (1.0 - fx) * src[y0, x0] + fx * src[y0, x1]
            bot = (1.0 - fx) * src[y1, x0] + fx * src[y1, x1]
            out[yo, xo] = (1.0 - fy) * top + fy * bot
    return out


def warp_bilinear_np(src, affine, out_h, out_w):
    h, w = src.shape
    yo, xo = np.mgrid[0:out_h, 0:out_w].astype(np.float64)
    xs = affine[0, 0] * xo + affine[0, 1] * yo + affine[0, 2]
    ys = affine[1, 0] * xo + affine[1, 1] * yo + affine[1, 2]
    xs = np.where((xs < 0.0) & (xs >= -WARP_EDGE_EPS), 0.0, xs)
    xs = np.where((xs > w - 1) & (xs <= w - 1 + WARP_EDGE_EPS), w - 1.0, xs)
    ys = np.where((ys < 0.0) & (ys >= -WARP_EDGE_EPS), 0.0, ys)
    ys = np.where((ys > h - 1) & (ys <= h - 1 + WARP_EDGE_EPS), h - 1.0, ys)
    inside = (xs >= 0.0) & (xs <= w - 1) & (ys >= 0.0) & (ys <= h - 1)
    xs = np.where(inside, xs, 0.0)
    ys = np.where(inside, ys, 0.0)
    x0 = np.minimum(np.floor(xs).astype(np.int64), max(w - 2, 0))
    y0 = np.minimum(np.floor(ys).astype(np.int64), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = (1.0 - fx) * src[y0, x0] + fx * src[y0, x1]
    bot = (1.0 - fx) * src[y1, x0] + fx * src[y1, x1]
    return np.where(inside, (1.0 - fy) * top + fy * bot, 0.0)


# -- polynomial residuals ------------------------------------------------------

@njit
def poly_residuals_nb(coeffs, x):
    """Sum over directions and frames of squared Horner evaluations, per emotion."""
    ne, nd, nc = coeffs.shape
    nl = x.shape[1]
    out = np.zeros(ne)
    for e in range(ne):
        acc = 0.0
        for d in range(nd):
            for t in range(nl):
                v = coeffs[e, d, 0]
                for c in range(1, nc):
                    v = v * x[d, t] + coeffs[e, d, c]
                acc += v * v
        out[e] = acc
    return out


def poly_residuals_np(coeffs, x):
    ne, nd, nc = coeffs.shape
    val = np.repeat(coeffs[:, :, 0:1], x.shape[1], axis=2)
    for c in range(1, nc):
        val = val * x[None, :, :] + coeffs[:, :, c:c + 1]
    return np.sum(val * val, axis=(1, 2))


if USE_NUMBA:
    integral_table = integral_table_nb
    rect_sums = rect_sums_nb
    haar_matrix = haar_matrix_nb
    window_votes = window_votes_nb
    best_stump = best_stump_nb
    jacobi_eigh = jacobi_eigh_nb
    warp_bilinear = warp_bilinear_nb
    poly_residuals = poly_residuals_nb
else:
    integral_table = integral_table_np
    rect_sums = rect_sums_np
    haar_matrix = haar_matrix_np
    window_votes = window_votes_np
    best_stump = best_stump_np
    jacobi_eigh = jacobi_eigh_np
    warp_bilinear = warp_bilinear_np
    poly_residuals = poly_residuals_np

NUMBA_KERNELS = {
    "integral_table": integral_table_nb,
    "rect_sums": rect_sums_nb,
    "haar_matrix": haar_matrix_nb,
    "window_votes": window_votes_nb,
    "best_stump": best_stump_nb,
    "jacobi_eigh": jacobi_eigh_nb,
    "warp_bilinear": warp_bilinear_nb,
    "poly_residuals": poly_residuals_nb,
}

NUMPY_KERNELS = {
    "integral_table": integral_table_np,
    "rect_sums": rect_sums_np,
    "haar_matrix": haar_matrix_np,
    "window_votes": window_votes_np,
    "best_stump": best_stump_np,
    "jacobi_eigh": jacobi_eigh_np,
    "warp_bilinear": warp_bilinear_np,
    "poly_residuals": poly_residuals_np,
}

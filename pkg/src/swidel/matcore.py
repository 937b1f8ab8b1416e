"""Dense matrix arithmetic and spectral quantities.

Matrices are plain 2-D ``float64`` numpy arrays. :func:`as_mat` validates
and freezes them (read-only copy, finite entries); every public routine
accepts anything array-like and validates on entry.

The eigenvalue solver is a classic isolate / balance / Hessenberg /
Francis double-shift QR pipeline written for the small (at most a dozen rows)
matrices produced by the closed-loop builders. When the QR iteration does
not converge, :func:`spectral_radius` falls back to Gelfand iteration with
repeated squaring.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConvergenceError, NumericOverflowError, ShapeError

__all__ = [
    "as_mat",
    "mat_mul",
    "op_norm",
    "eigvals",
    "spectral_radius",
    "gelfand_bracket",
    "block",
]

_RADIX = 2.0
_QR_MAXITS = 60


def as_mat(a, *, name: str = "matrix") -> np.ndarray:
    """Return a read-only finite 2-D float64 copy of ``a``."""
    m = np.array(a, dtype=float)
    if m.ndim == 1 and m.size == 0:
        m = m.reshape(0, 0)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"{name} must have positive dimensions, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericOverflowError(f"{name} has non-finite entries")
    m.setflags(write=False)
    return m


def _square(a, name="matrix") -> np.ndarray:
    m = as_mat(a, name=name)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be square, got {m.shape}")
    return m


def mat_mul(left, right) -> np.ndarray:
    """Matrix product with shape and overflow checks."""
    L = as_mat(left, name="left factor")
    R = as_mat(right, name="right factor")
    if L.shape[1] != R.shape[0]:
        raise ShapeError(f"cannot multiply {L.shape} by {R.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = L @ R
    if not np.all(np.isfinite(out)):
        raise NumericOverflowError("matrix product overflowed")
    out.setflags(write=False)
    return out


def op_norm(M, *, rtol: float = 1e-12, maxiter: int = 10_000) -> float:
    """Induced 2-norm (largest singular value).

    Power iteration on ``M^T M`` with a Rayleigh-quotient stopping rule.
    The matrix is prescaled by its largest entry so the Gram matrix cannot
    overflow.
    """
    M = as_mat(M)
    scale = float(np.max(np.abs(M)))
    if scale == 0.0:
        return 0.0
    S = M / scale
    G = S.T @ S
    # start from the heaviest column of the Gram matrix: it always has a
    # nonzero component along the dominant eigenvector of a PSD matrix
    v = G[:, int(np.argmax(np.einsum("ij,ij->j", G, G)))].copy()
    v /= np.linalg.norm(v)
    lam = 0.0
    prev_change = math.inf
    for _ in range(maxiter):
        w = G @ v
        new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
        change = abs(new - lam)
        lam = new
        # the Rayleigh quotient converges geometrically; extrapolate the
        # remaining error from the observed contraction ratio
        ratio = change / prev_change if prev_change > 0 else 0.0
        tail = change * ratio / (1.0 - ratio) if ratio < 1.0 else math.inf
        if change <= rtol * new and tail <= rtol * new:
            break
        prev_change = change
    return scale * math.sqrt(max(lam, 0.0))


def _isolate(A: np.ndarray) -> tuple[list[complex], np.ndarray]:
    """Split off eigenvalues exposed by zero rows/columns.

    A row (or column) that is zero off the diagonal can be permuted to the
    bottom (or top), leaving a block-triangular matrix whose diagonal entry
    is an exact eigenvalue. Repeating this on the rest keeps structurally
    nilpotent parts (shift blocks) exactly zero instead of paying the
    ``eps^(1/k)`` error of a rounded Jordan block.
    """
    found: list[complex] = []
    keep = list(range(A.shape[0]))
    changed = True
    while changed and len(keep) > 1:
        changed = False
        sub = A[np.ix_(keep, keep)]
        off = sub - np.diag(np.diag(sub))
        for k in range(len(keep)):
            if not off[k].any() or not off[:, k].any():
                found.append(complex(sub[k, k]))
                del keep[k]
                changed = True
                break
    return found, A[np.ix_(keep, keep)]


def _balance(a: list[list[float]]) -> None:
    """Parlett-Reinsch diagonal balancing, in place."""
    n = len(a)
    sqrdx = _RADIX * _RADIX
    done = False
    while not done:
        done = True
        for i in range(n):
            r = c = 0.0
            for j in range(n):
                if j != i:
                    c += abs(a[j][i])
                    r += abs(a[i][j])
            if c != 0.0 and r != 0.0:
                g = r / _RADIX
                f = 1.0
                s = c + r
                while c < g:
                    f *= _RADIX
                    c *= sqrdx
                g = r * _RADIX
                while c > g:
                    f /= _RADIX
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = False
                    g = 1.0 / f
                    for j in range(n):
                        a[i][j] *= g
                    for j in range(n):
                        a[j][i] *= f


def _hessenberg(a: np.ndarray) -> np.ndarray:
    """Householder reduction to upper Hessenberg form (similarity)."""
    H = np.array(a, dtype=float)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1 :, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        if x[0] > 0:
            alpha = -alpha
        v = x
        v[0] -= alpha
        vn = np.linalg.norm(v)
        if vn == 0.0:
            continue
        v /= vn
        H[k + 1 :, k:] -= 2.0 * np.outer(v, v @ H[k + 1 :, k:])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v)
        H[k + 2 :, k] = 0.0
    return H


def _hqr(a: list[list[float]]) -> list[complex]:
    """Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR.

    Operates in place on a list-of-lists copy. Raises ConvergenceError when
    a single eigenvalue needs more than ``_QR_MAXITS`` sweeps.
    """
    n = len(a)
    wr = [0.0] * n
    wi = [0.0] * n
    anorm = 0.0
    for i in range(n):
        for j in range(max(i - 1, 0), n):
            anorm += abs(a[i][j])
    nn = n - 1
    t = 0.0
    p = q = r = x = y = z = 0.0
    while nn >= 0:
        its = 0
        while True:
            l = nn
            while l >= 1:
                s = abs(a[l - 1][l - 1]) + abs(a[l][l])
                if s == 0.0:
                    s = anorm
                if abs(a[l][l - 1]) + s == s:
                    a[l][l - 1] = 0.0
                    break
                l -= 1
            x = a[nn][nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
                break
            y = a[nn - 1][nn - 1]
            w = a[nn][nn - 1] * a[nn - 1][nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                    wi[nn - 1] = wi[nn] = 0.0
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1] = z
                    wi[nn] = -z
                nn -= 2
                break
            if its == _QR_MAXITS:
                raise ConvergenceError("QR iteration did not converge")
            if its in (10, 20, 40):
                # exceptional shift
                t += x
                for i in range(nn + 1):
                    a[i][i] -= x
                s = abs(a[nn][nn - 1]) + abs(a[nn - 1][nn - 2])
                y = x = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            m = nn - 2
            while m >= l:
                z = a[m][m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1][m] + a[m][m + 1]
                q = a[m + 1][m + 1] - z - r - s
                r = a[m + 2][m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m][m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1][m - 1]) + abs(z) + abs(a[m + 1][m + 1]))
                if u + v == v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i][i - 2] = 0.0
                if i != m + 2:
                    a[i][i - 3] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = a[k][k - 1]
                    q = a[k + 1][k - 1]
                    r = a[k + 2][k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k][k - 1] = -a[k][k - 1]
                else:
                    a[k][k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                for j in range(k, nn + 1):
                    p = a[k][j] + q * a[k + 1][j]
                    if k != nn - 1:
                        p += r * a[k + 2][j]
                        a[k + 2][j] -= p * z
                    a[k + 1][j] -= p * y
                    a[k][j] -= p * x
                mmin = nn if nn < k + 3 else k + 3
                for i in range(l, mmin + 1):
                    p = x * a[i][k] + y * a[i][k + 1]
                    if k != nn - 1:
                        p += z * a[i][k + 2]
                        a[i][k + 2] -= p * r
                    a[i][k + 1] -= p * q
                    a[i][k] -= p
    return [complex(wr[i], wi[i]) for i in range(n)]


def eigvals(M) -> list[complex]:
    """All eigenvalues of a square matrix (isolate, balance, Hessenberg, QR)."""
    found, A = _isolate(_square(M))
    n = A.shape[0]
    if n == 1:
        return found + [complex(A[0, 0])]
    rows = A.tolist()
    _balance(rows)
    H = _hessenberg(np.array(rows))
    return found + _hqr(H.tolist())


def gelfand_bracket(M, steps: int = 60) -> tuple[float, float]:
    """Bracket the spectral radius by repeated squaring.

    After ``j`` squarings ``P = M^(2^j)`` (kept normalised), the upper end is
    ``||P||^(1/2^j)`` and the lower end ``(|trace P| / n)^(1/2^j)``.
    """
    A = _square(M)
    n = A.shape[0]
    P = np.array(A)
    logscale = 0.0  # P_true = exp(logscale) * P
    power = 1
    lo, hi = 0.0, math.inf
    for _ in range(steps):
        nrm = float(np.linalg.norm(P, 2))
        if nrm == 0.0:
            return 0.0, 0.0
        hi = min(hi, math.exp((logscale + math.log(nrm)) / power))
        tr = abs(float(np.trace(P)))
        if tr > 0.0:
            lo = max(lo, math.exp((logscale + math.log(tr / n)) / power))
        P = P / nrm
        logscale += math.log(nrm)
        P = P @ P
        logscale *= 2.0
        power *= 2
        if hi - lo <= 1e-15 * hi:
            break
    return lo, hi


def spectral_radius(M, *, atol: float = 1e-9) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    A = _square(M)
    try:
        return max(abs(lam) for lam in eigvals(A))
    except ConvergenceError:
        lo, hi = gelfand_bracket(A)
        if hi - lo <= atol:
            return 0.5 * (lo + hi)
        raise ConvergenceError(
            "spectral radius did not converge", lower=lo, upper=hi
        ) from None


def block(rows) -> np.ndarray:
    """Assemble a matrix from a nested list of blocks (thin ``np.block``)."""
    return as_mat(np.block(rows))

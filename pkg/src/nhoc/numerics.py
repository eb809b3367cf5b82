"""Small shared numerical helpers: finite differences, null spaces, steppers."""

import numpy as np

from .errors import RankDeficient

FD_STEP = 1e-6


def fd_partials(f, q, step=FD_STEP):
    """Central finite differences of an array-valued function of the chart point.

    Returns an array of shape (len(q),) + f(q).shape; entry [i] is the partial
    derivative with respect to q^i.  For an empty chart the result is empty.
    """
    q = np.asarray(q, dtype=float)
    if q.size == 0:
        return np.zeros((0,) + np.shape(f(q)))
    out = []
    for i in range(q.size):
        dq = np.zeros_like(q)
        dq[i] = step
        out.append((np.asarray(f(q + dq), dtype=float)
                    - np.asarray(f(q - dq), dtype=float)) / (2.0 * step))
    return np.stack(out)


def fd_jacobian(f, x, step=FD_STEP, central=True):
    """Finite-difference Jacobian of a vector map; columns are partials."""
    x = np.asarray(x, dtype=float)
    f0 = None if central else np.asarray(f(x), dtype=float)
    cols = []
    for i in range(x.size):
        dx = np.zeros_like(x)
        dx[i] = step
        if central:
            cols.append((np.asarray(f(x + dx)) - np.asarray(f(x - dx))) / (2.0 * step))
        else:
            cols.append((np.asarray(f(x + dx)) - f0) / step)
    return np.column_stack(cols) if cols else np.zeros((np.size(f0), 0))


def check_full_rank(a, tol=1e-10, what="constraint"):
    """Raise RankDeficient unless the rows of `a` are independent."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] == 0:
        return
    if np.linalg.matrix_rank(a, tol=tol) < a.shape[0]:
        raise RankDeficient(f"{what} rows are linearly dependent (tol={tol:g})")


def rref_null_space(a, tol=1e-10):
    """Deterministic basis of the kernel of `a`, one row per basis vector.

    Gauss-Jordan elimination with partial pivoting; each free column yields a
    basis vector with a unit entry in that column, taken in ascending column
    order.  Sign convention: first nonzero entry of each vector is positive.
    For coordinate-aligned inputs this reproduces the coordinate basis of the
    kernel, which keeps adapted frames human-readable.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[1]
    if a.shape[0] == 0 or a.size == 0:
        return np.eye(n)
    r = a.copy()
    pivots = []
    row = 0
    for col in range(n):
        if row >= r.shape[0]:
            break
        k = row + np.argmax(np.abs(r[row:, col]))
        if abs(r[k, col]) <= tol:
            continue
        r[[row, k]] = r[[k, row]]
        r[row] = r[row] / r[row, col]
        for j in range(r.shape[0]):
            if j != row:
                r[j] -= r[j, col] * r[row]
        pivots.append(col)
        row += 1
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for c in free:
        v = np.zeros(n)
        v[c] = 1.0
        for i, p in enumerate(pivots):
            v[p] = -r[i, c]
        nz = np.nonzero(np.abs(v) > tol)[0]
        if nz.size and v[nz[0]] < 0:
            v = -v
        basis.append(v)
    return np.array(basis).reshape(len(basis), n)


def rk4_step(f, t, x, dt):
    """One classical Runge-Kutta step for x' = f(t, x)."""
    k1 = f(t, x)
    k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = f(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def symmetric_positive_definite(a, tol=0.0):
    """True when `a` is symmetric and positive-definite."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(a).max())):
        return False
    try:
        np.linalg.cholesky(a - tol * np.eye(a.shape[0]))
        return True
    except np.linalg.LinAlgError:
        return False

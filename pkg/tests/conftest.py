import math

import numpy as np
import pytest


def sym2x2_eig(m):
    """Closed-form eigen-decomposition of a symmetric 2x2 matrix.

    Returns eigenvalues (descending by magnitude) and unit eigenvectors as
    columns. Independent of LAPACK; used as the oracle for the rank-1
    example ``[[1, 2], [2, 4]]``.
    """
    a, b, d = float(m[0][0]), float(m[0][1]), float(m[1][1])
    tr, det = a + d, a * d - b * b
    disc = math.sqrt(max(tr * tr / 4 - det, 0.0))
    lams = [tr / 2 + disc, tr / 2 - disc]
    vecs = []
    for lam in lams:
        v = (b, lam - a) if abs(b) > 0 else ((1.0, 0.0) if abs(lam - a) < abs(lam - d) else (0.0, 1.0))
        n = math.hypot(*v)
        vecs.append((v[0] / n, v[1] / n))
    order = sorted(range(2), key=lambda i: -abs(lams[i]))
    return [lams[i] for i in order], np.array([vecs[i] for i in order]).T


def oracle_spectral_map(x, fn):
    """Brute-force spectral map: eigen-decompose x^T x, take square roots
    for singular values, recover U = X V / sigma, map, multiply back.

    Deliberately avoids numpy.linalg.svd so it is independent of the code
    under test.
    """
    x = np.asarray(x, dtype=float)
    transpose = x.shape[0] < x.shape[1]
    if transpose:
        x = x.T
    gram = x.T @ x
    w, v = np.linalg.eigh(gram)
    order = np.argsort(w)[::-1]
    w, v = np.clip(w[order], 0, None), v[:, order]
    sigma = np.sqrt(w)
    out = np.zeros_like(x)
    for i, s in enumerate(sigma):
        if s <= 1e-12 * max(sigma[0], 1e-300):
            continue
        u = x @ v[:, i] / s
        out += fn(s) * np.outer(u, v[:, i])
    return out.T if transpose else out


RANK1 = np.array([[1.0, 2.0], [2.0, 4.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

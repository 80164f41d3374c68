import numpy as np
import pytest

from blobplot import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # JIT compile once so timed tests never pay the compiler
    _kernels.warmup()


def knn_oracle(points, k, groups=None):
    """Brute-force KNN reference: squared distances accumulated dimension
    by dimension, candidates ordered by (distance, id). Deliberately
    written as a plain double loop, independent of the library kernels."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    idx = np.full((n, k), -1, dtype=np.int64)
    d2 = np.full((n, k), np.inf)
    for i in range(n):
        cand = []
        for j in range(n):
            if groups is None:
                if j == i:
                    continue
            elif groups[j] == groups[i]:
                continue
            s = 0.0
            for t in range(points.shape[1]):
                diff = points[i, t] - points[j, t]
                s += diff * diff
            cand.append((s, j))
        cand.sort()
        for c, (s, j) in enumerate(cand[:k]):
            idx[i, c] = j
            d2[i, c] = s
    return idx, d2


def shoelace(loop):
    x, y = loop[:, 0], loop[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

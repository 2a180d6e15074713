"""Independent reference implementations used to check the package's math.

Everything here is deliberately written the slow, obvious way (pure Python
integers, double loops, finite differences) and stays independent of the
code paths it verifies.
"""

import numpy as np

LCG_MULTIPLIER = 6364136223846793005
LCG_INCREMENT = 1442695040888963407


def lcg_entries(seed: int, count: int) -> list[float]:
    """Arbitrary-precision evaluation of the stub's projection stream."""
    x = int(seed) % 2**64
    out = []
    for _ in range(count):
        x = (LCG_MULTIPLIER * x + LCG_INCREMENT) % 2**64
        out.append((x >> 33) / 2**30 - 1.0)
    return out


def lcg_states(seed: int, count: int) -> list[int]:
    x = int(seed) % 2**64
    states = []
    for _ in range(count):
        x = (LCG_MULTIPLIER * x + LCG_INCREMENT) % 2**64
        states.append(x)
    return states


def pairwise_auc(scores, labels) -> float:
    """Brute-force tie-aware AUC: over all positive/negative pairs,
    count s+ > s- as 1 and s+ = s- as 1/2, with one exact final division."""
    scores = list(map(float, scores))
    labels = list(map(int, labels))
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    doubled = 0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                doubled += 2
            elif sp == sn:
                doubled += 1
    return doubled / (2 * len(pos) * len(neg))


def block_mean(img: np.ndarray, out_side: int) -> np.ndarray:
    """Naive loop version of floor-boundary block-average pooling."""
    h, w, c = img.shape
    out = np.zeros((out_side, out_side, c), dtype=np.float64)
    for by in range(out_side):
        for bx in range(out_side):
            y0, y1 = h * by // out_side, h * (by + 1) // out_side
            x0, x1 = w * bx // out_side, w * (bx + 1) // out_side
            total = np.zeros(c, dtype=np.float64)
            for y in range(y0, y1):
                for x in range(x0, x1):
                    total += img[y, x]
            out[by, bx] = total / ((y1 - y0) * (x1 - x0))
    return out


def finite_difference_grads(loss_of_params, params_arrays, h: float = 1e-5):
    """Central finite differences of a scalar loss over every coordinate
    of every parameter array (arrays are modified in place and restored)."""
    grads = []
    for arr in params_arrays:
        g = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.shape[0]):
            original = flat[i]
            flat[i] = original + h
            up = loss_of_params()
            flat[i] = original - h
            down = loss_of_params()
            flat[i] = original
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads

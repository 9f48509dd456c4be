"""Shared comparison utilities for the test suite."""
import numpy as np


def match_levels(method, oracle, lo, hi, edge=1e-6):
    """Pair sorted level lists inside ``[lo, hi]``.

    Returns ``(max_diff, missed, extra)`` where ``missed`` are oracle levels
    with no method partner and ``extra`` method levels with no oracle partner.
    Levels within ``edge`` of the window boundary are ignored on both sides.
    """
    m = np.sort([v for v in method if lo + edge <= v <= hi - edge])
    o = np.sort([v for v in oracle if lo + edge <= v <= hi - edge])
    if m.size != o.size:
        used = set()
        extra = []
        for v in m:
            j = int(np.argmin(np.abs(o - v))) if o.size else -1
            if j < 0 or j in used or abs(o[j] - v) > 1e-4:
                extra.append(float(v))
            else:
                used.add(j)
        missed = [float(o[j]) for j in range(o.size) if j not in used]
        return float("inf"), missed, extra
    diff = float(np.max(np.abs(m - o))) if m.size else 0.0
    return diff, [], []

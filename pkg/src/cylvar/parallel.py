"""Thread caps and order-fixed reductions.

``CYLVAR_THREADS`` caps worker threads; ``CYLVAR_DETERMINISTIC=1`` makes every
reduction use a partition that does not depend on the thread count, so results
are bit-identical however many workers run.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 1 << 15


def thread_count():
    raw = os.environ.get("CYLVAR_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return 1


def deterministic():
    return os.environ.get("CYLVAR_DETERMINISTIC", "") == "1"


def pairwise_tree(parts):
    """Combine partial sums by a fixed balanced binary tree."""
    parts = list(parts)
    if not parts:
        return 0.0
    while len(parts) > 1:
        nxt = [parts[k] + parts[k + 1] for k in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def reduce_sum(values):
    """Sum of all entries.

    In deterministic mode the flat array is cut into fixed ``CHUNK``-sized
    blocks, the blocks are summed by the workers and the partial sums are
    combined with :func:`pairwise_tree`. Otherwise the work is split by thread
    count.
    """
    flat = np.ascontiguousarray(values, dtype=np.float64).ravel()
    if flat.size == 0:
        return 0.0
    nthreads = thread_count()
    if deterministic():
        bounds = list(range(0, flat.size, CHUNK)) + [flat.size]
    else:
        if nthreads == 1:
            return float(np.sum(flat))
        step = -(-flat.size // nthreads)
        bounds = list(range(0, flat.size, step)) + [flat.size]
    spans = list(zip(bounds[:-1], bounds[1:]))
    parts = map_ordered(lambda s: float(np.sum(flat[s[0]:s[1]])), spans)
    return float(pairwise_tree(parts))


def map_ordered(func, items):
    """``list(map(func, items))`` on up to ``thread_count()`` threads; output order is input order."""
    items = list(items)
    nthreads = min(thread_count(), len(items))
    if nthreads <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        return list(pool.map(func, items))


def dot(a, b):
    """Inner product; in deterministic mode it avoids BLAS so the thread count cannot change the result."""
    if deterministic():
        return reduce_sum(np.multiply(a, b))
    return float(np.dot(a, b))

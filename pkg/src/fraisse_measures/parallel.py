"""Deterministic worker-pool helper for the scan loops.

parallel_map keeps the input order of results, so callers see identical
output whatever the worker count.  Workers are forked: the function and item
list are published in a module global before the pool starts and inherited
by the children, which lets callers pass closures.  Anything that cannot
fork (or a jobs value of one) runs serially.
"""

from __future__ import annotations

import multiprocessing

_ACTIVE = None


def _invoke(index):
    fn, items = _ACTIVE
    return fn(items[index])


def parallel_map(fn, items, jobs: int):
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    global _ACTIVE
    try:
        ctx = multiprocessing.get_context("fork")
    except ValueError:
        return [fn(item) for item in items]
    _ACTIVE = (fn, items)
    try:
        workers = min(jobs, len(items))
        chunk = max(1, len(items) // (workers * 4))
        with ctx.Pool(workers) as pool:
            return pool.map(_invoke, range(len(items)), chunksize=chunk)
    except OSError:
        return [fn(item) for item in items]
    finally:
        _ACTIVE = None

"""Process-pool plumbing for range-parallel phases.

Workers are forked, so the heavy shared state (graph, level slices,
filters) is published to module globals before the pool is created and
inherited copy-on-write; only small (lo, hi) tasks and per-range result
arrays cross the pipe. Results are consumed in task order, which makes
every phase's output independent of the worker count.
"""

import multiprocessing
import os

_WORK = {}


def set_context(**kw):
    _WORK.update(kw)


def get_context():
    return _WORK


def clear_context():
    _WORK.clear()


def map_ranges(fn, tasks, workers):
    """Run fn over tasks, in order, optionally on a fork pool.

    fn must be a module-level function reading its big inputs from the
    published context. Falls back to in-process execution for a single
    worker or a single task.
    """
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(processes=workers) as pool:
        return pool.map(fn, tasks, chunksize=1)


def default_workers():
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity")
               else os.cpu_count() or 1)

# SPDX-FileCopyrightText: Copyright (c) 2024 kmp-recipe contributors
# SPDX-License-Identifier: MIT

"""Execution contexts that run recipe mapper functions.

``map`` submits one task per item and returns futures in submission order;
``wait`` resolves them in that same order, so reducers never see a
worker-dependent ordering.
"""

import os
from concurrent import futures

from kmp_recipe.lib import exceptions
from kmp_recipe.log import logger


class Context:
    mode = None

    def __init__(self, workers=None):
        self.workers = workers

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.shutdown()

    def shutdown(self):
        pass

    def map(self, func, iterable, *args, **kwargs):
        raise NotImplementedError

    def wait(self, waitable):
        return [future.result() for future in waitable]

    @staticmethod
    def get_modes():
        return [cls.mode for cls in (SequentialContext, ConcurrentContext)]

    @staticmethod
    def create_context(mode=None, workers=None):
        mode = mode or "sequential"
        if mode == SequentialContext.mode:
            return SequentialContext(workers)
        if mode == ConcurrentContext.mode:
            return ConcurrentContext(workers)
        raise exceptions.ValueError(f"Unknown mode '{mode}'.")


class SequentialContext(Context):
    mode = "sequential"

    def map(self, func, iterable, *args, **kwargs):
        results = []
        for item in iterable:
            future = futures.Future()
            future.set_result(func(item, *args, **kwargs))
            results.append(future)
        return results


class ConcurrentContext(Context):
    mode = "concurrent"

    def __init__(self, workers=None):
        super().__init__(workers or os.cpu_count())
        logger.info(f"Starting a process pool with {self.workers} workers.")
        self._executor = futures.ProcessPoolExecutor(max_workers=self.workers)

    def shutdown(self):
        self._executor.shutdown(wait=True)

    def map(self, func, iterable, *args, **kwargs):
        return [self._executor.submit(func, item, *args, **kwargs) for item in iterable]

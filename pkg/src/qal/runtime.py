# SPDX-License-Identifier: MIT
# SPDX-FileCopyrightText: 2025 qal-sim contributors
"""Logging setup, seed splitting and the worker pool shared by the experiment commands."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np
from rich.console import Console
from rich.logging import RichHandler

T = TypeVar("T")
R = TypeVar("R")

LOG_FORMAT = "%(message)s"


def configure_logging(
    verbose: bool = False, quiet: bool = False, console: Console | None = None
) -> None:
    """Route the package loggers through rich; DEBUG with --verbose, WARNING with --quiet."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    handler = RichHandler(console=console or Console(stderr=True), show_path=False, markup=False)
    root = logging.getLogger("qal")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False
    handler.setFormatter(logging.Formatter(LOG_FORMAT))


def default_threads() -> int:
    if hasattr(os, "sched_getaffinity"):
        return max(1, len(os.sched_getaffinity(0)))
    return os.cpu_count() or 1


def spawn_generators(seed: int, count: int) -> list[np.random.Generator]:
    """Independent per-trajectory generators derived from one run seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """map() over a thread pool; results come back in input order."""
    items: Sequence[T] = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))

"""Allocation counters for positional-encoding storage.

Builders call :func:`record` with every positional array they materialize.
Inside a :func:`count_pe_storage` block those calls are tallied per kind;
outside one they are no-ops.
"""

from __future__ import annotations

import contextlib
import contextvars
import threading
from collections import Counter

_active: contextvars.ContextVar["PEStorageCounter | None"] = contextvars.ContextVar(
    "pe_storage_counter", default=None)


class PEStorageCounter:
    """Tally of positional-encoding values materialized, keyed by kind."""

    def __init__(self):
        self.values = Counter()
        self.allocations = Counter()
        self._lock = threading.Lock()

    def add(self, kind: str, n_values: int):
        with self._lock:
            self.values[kind] += int(n_values)
            self.allocations[kind] += 1

    @property
    def total(self) -> int:
        return sum(self.values.values())

    def __repr__(self):
        return f"PEStorageCounter({dict(self.values)})"


def record(kind: str, array) -> None:
    counter = _active.get()
    if counter is not None:
        counter.add(kind, array.size)


@contextlib.contextmanager
def count_pe_storage():
    counter = PEStorageCounter()
    token = _active.set(counter)
    try:
        yield counter
    finally:
        _active.reset(token)

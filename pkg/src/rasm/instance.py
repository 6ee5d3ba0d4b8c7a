"""Bipartite coverage problem data: instances, selections, and the file format.

An instance is a complete bipartite coverage model: ``n`` candidate sets,
``m`` items, and an ``n x m`` matrix whose entry ``[i, j]`` is the
independent probability that set ``i`` covers item ``j`` when selected.
Selections over the candidate sets are plain 0/1 integer vectors.

Instance files are plain text, with probabilities written as full-precision
decimal strings so a save/load round trip reproduces the matrix bit-exactly::

    rasc <n> <m>
    <p11> <p12> ... <p1m>
    ...
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ParseError

FILE_MAGIC = "rasc"


class CoverageInstance:
    """Immutable coverage model: ``n`` candidate sets over ``m`` items."""

    def __init__(self, probs):
        probs = np.array(probs, dtype=float)
        if probs.ndim != 2 or probs.shape[0] < 1 or probs.shape[1] < 1:
            raise ParameterError("probability matrix must be 2-D with n >= 1, m >= 1")
        if not np.all(np.isfinite(probs)):
            raise ParameterError("probabilities must be finite")
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise ParameterError("probabilities must lie in [0, 1]")
        probs.setflags(write=False)
        self._probs = probs

    @property
    def n(self) -> int:
        return self._probs.shape[0]

    @property
    def m(self) -> int:
        return self._probs.shape[1]

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    def __eq__(self, other):
        if not isinstance(other, CoverageInstance):
            return NotImplemented
        return self._probs.shape == other._probs.shape and np.array_equal(
            self._probs, other._probs
        )

    def __hash__(self):
        return hash((self.n, self.m, self._probs.tobytes()))

    def __repr__(self):
        return f"CoverageInstance(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class FeasibleRegion:
    """Cardinality budget: feasible selections have at most ``k`` ones."""

    k: int

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ParameterError(f"budget k must be a positive integer, got {self.k!r}")

    def validate_for(self, n: int) -> None:
        if self.k > n:
            raise ParameterError(f"budget k={self.k} exceeds ground set size n={n}")


def as_selection(x, n: int | None = None) -> np.ndarray:
    """Normalize a selection to a 0/1 int8 vector, checking the dimension."""
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ParameterError("selection must be a 1-D 0/1 vector")
    if n is not None and arr.shape[0] != n:
        raise ParameterError(f"selection has length {arr.shape[0]}, expected {n}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ParameterError("selection entries must be 0 or 1")
    return arr.astype(np.int8)


def support_of(x) -> tuple[int, ...]:
    """Indices selected by ``x``, as a sorted tuple."""
    return tuple(int(j) for j in np.flatnonzero(np.asarray(x)))


def selection_from_support(indices, n: int) -> np.ndarray:
    """Build the 0/1 vector of length ``n`` selecting exactly ``indices``."""
    x = np.zeros(n, dtype=np.int8)
    for j in indices:
        if not 0 <= j < n:
            raise ParameterError(f"support index {j} outside [0, {n})")
        x[j] = 1
    return x


def generate_instance(
    n: int, m: int, prob_low: float, prob_high: float, seed: int
) -> CoverageInstance:
    """Draw a complete bipartite instance with i.i.d. uniform probabilities.

    Every entry is drawn uniformly from ``[prob_low, prob_high]``; the same
    seed reproduces the matrix bit-exactly.
    """
    if n < 1 or m < 1:
        raise ParameterError("n and m must be positive")
    if not (0.0 <= prob_low <= prob_high <= 1.0):
        raise ParameterError(
            f"need 0 <= prob_low <= prob_high <= 1, got [{prob_low}, {prob_high}]"
        )
    rng = np.random.default_rng(seed)
    return CoverageInstance(rng.uniform(prob_low, prob_high, size=(n, m)))


def save_instance(instance: CoverageInstance, path) -> None:
    """Write ``instance`` in the text format documented in the module docstring."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{FILE_MAGIC} {instance.n} {instance.m}\n")
        for row in instance.probs:
            fh.write(" ".join(repr(float(v)) for v in row))
            fh.write("\n")


def load_instance(path) -> CoverageInstance:
    """Parse an instance file, reporting malformed content with line/field info."""
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.readlines()
    lines = [(i + 1, line.strip()) for i, line in enumerate(raw)]
    lines = [(no, text) for no, text in lines if text]
    if not lines:
        raise ParseError("empty file")

    header_no, header = lines[0]
    tokens = header.split()
    if len(tokens) != 3 or tokens[0] != FILE_MAGIC:
        raise ParseError(f"expected header '{FILE_MAGIC} <n> <m>'", line=header_no)
    try:
        n, m = int(tokens[1]), int(tokens[2])
    except ValueError:
        raise ParseError("header dimensions must be integers", line=header_no) from None
    if n < 1 or m < 1:
        raise ParseError(f"dimensions must be positive, got n={n} m={m}", line=header_no)

    rows = lines[1:]
    if len(rows) != n:
        if len(rows) < n:
            raise ParseError(f"expected {n} probability rows, found {len(rows)}")
        extra_no, _ = rows[n]
        raise ParseError(
            f"expected {n} probability rows, found {len(rows)}", line=extra_no
        )

    probs = np.empty((n, m), dtype=float)
    for i, (line_no, text) in enumerate(rows):
        fields = text.split()
        if len(fields) != m:
            raise ParseError(
                f"row has {len(fields)} values, expected {m}", line=line_no
            )
        for j, field in enumerate(fields):
            try:
                value = float(field)
            except ValueError:
                raise ParseError(
                    f"invalid probability {field!r}", line=line_no, column=j + 1
                ) from None
            if not np.isfinite(value) or value < 0.0 or value > 1.0:
                raise ParseError(
                    f"probability {field} outside [0, 1]", line=line_no, column=j + 1
                )
            probs[i, j] = value
    return CoverageInstance(probs)

"""Alphabets, symbol streams and dataset files.

Symbols are stored as integers ``0..K-1``.  A binary alphabet reads and
writes the tokens ``-1``/``+1`` and maps them to ``0``/``1``; the sign used in
the learners' arithmetic is ``2*y - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class DatasetError(ValueError):
    """Raised when a dataset file or in-memory stream fails validation."""


@dataclass(frozen=True)
class Alphabet:
    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 2:
            raise ValueError(f"alphabet needs at least 2 symbols, got {self.size!r}")

    @property
    def binary(self) -> bool:
        return self.size == 2

    def encode(self, token) -> int:
        """Map an external token (``-1``/``+1`` for binary) to an internal symbol."""
        value = int(token)
        if self.binary:
            if value == -1:
                return 0
            if value == 1:
                return 1
            raise DatasetError(f"binary symbol must be -1 or +1, got {token!r}")
        if not 0 <= value < self.size:
            raise DatasetError(f"symbol {token!r} out of alphabet of size {self.size}")
        return value

    def decode(self, symbol: int) -> int:
        if self.binary:
            return 1 if symbol else -1
        return int(symbol)

    def format(self, symbol: int) -> str:
        if self.binary:
            return "+1" if symbol else "-1"
        return str(int(symbol))


def _parse_int(token: str) -> int:
    return int(token.replace("−", "-"))


@dataclass(frozen=True)
class Dataset:
    """One output stream with optional side information and corruption mask.

    ``inputs`` always has shape ``(len(symbols), n)``; ``n == 0`` means no side
    information, i.e. every ``x_t`` is the empty (zero) vector.
    """

    symbols: tuple[int, ...]
    alphabet: Alphabet
    inputs: np.ndarray = field(default=None, compare=False)
    mask: tuple[bool, ...] | None = None

    def __post_init__(self):
        symbols = tuple(int(s) for s in self.symbols)
        for pos, s in enumerate(symbols, start=1):
            if not 0 <= s < self.alphabet.size:
                raise DatasetError(f"position {pos}: symbol {s} out of alphabet")
        object.__setattr__(self, "symbols", symbols)
        inputs = self.inputs
        if inputs is None:
            inputs = np.zeros((len(symbols), 0))
        inputs = np.asarray(inputs, dtype=float)
        if inputs.ndim != 2 or inputs.shape[0] != len(symbols):
            raise DatasetError(
                f"input stream must have shape ({len(symbols)}, n), got {inputs.shape}"
            )
        if inputs.shape[1]:
            sq = np.einsum("ij,ij->i", inputs, inputs)
            bad = np.flatnonzero(sq > 1.0)
            if bad.size:
                raise DatasetError(
                    f"position {bad[0] + 1}: ||x||^2 = {sq[bad[0]]:.6g} exceeds 1"
                )
        inputs.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        if self.mask is not None:
            mask = tuple(bool(m) for m in self.mask)
            if len(mask) != len(symbols):
                raise DatasetError(
                    f"mask length {len(mask)} does not match stream length {len(symbols)}"
                )
            object.__setattr__(self, "mask", mask)

    def __len__(self):
        return len(self.symbols)

    @property
    def n_features(self) -> int:
        return self.inputs.shape[1]

    @classmethod
    def from_tokens(cls, tokens: Iterable, alphabet: Alphabet, **kw) -> "Dataset":
        return cls(tuple(alphabet.encode(tok) for tok in tokens), alphabet, **kw)

    def tokens(self) -> list[int]:
        return [self.alphabet.decode(s) for s in self.symbols]

    def suffix(self, t: int, i: int) -> tuple[int, ...]:
        """``y_{t-i} .. y_{t-1}`` in chronological order (positions are 1-based)."""
        if not 1 <= i <= t - 1:
            raise IndexError(f"suffix of length {i} does not exist before position {t}")
        return self.symbols[t - 1 - i : t - 1]


@dataclass(frozen=True)
class Segment:
    """A contiguous slice ``[start, stop)`` of a dataset (0-based, half-open).

    The parent dataset stays attached so rounds inside the segment still see
    the full preceding history.
    """

    dataset: Dataset
    start: int
    stop: int

    def __len__(self):
        return self.stop - self.start

    @property
    def symbols(self) -> tuple[int, ...]:
        return self.dataset.symbols[self.start : self.stop]

    @property
    def positions(self) -> range:
        """1-based stream positions covered by the segment."""
        return range(self.start + 1, self.stop + 1)

    def suffix(self, t: int, i: int) -> tuple[int, ...]:
        if not self.start < t <= self.stop:
            raise IndexError(f"position {t} outside segment [{self.start + 1}, {self.stop}]")
        return self.dataset.suffix(t, i)


def split(ds: Dataset, fractions: Sequence[float]) -> list[Segment]:
    """Cut a dataset into prefix-contiguous segments.

    Boundaries sit at ``floor(cumulative_fraction * len(ds))``.
    """
    if not fractions:
        raise ValueError("need at least one fraction")
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise ValueError(f"fractions must lie in (0, 1], got {f!r}")
    if abs(math.fsum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {math.fsum(fractions)!r}")
    n = len(ds)
    bounds = [0]
    acc = 0.0
    for f in fractions[:-1]:
        acc += f
        # guard against 0.6000000000000001-style drift pushing a boundary up
        bounds.append(math.floor(round(acc * n, 9)))
    bounds.append(n)
    segments = []
    for a, b in zip(bounds, bounds[1:]):
        if b <= a:
            raise DatasetError(
                f"split {list(fractions)} of a length-{n} stream yields an empty segment"
            )
        segments.append(Segment(ds, a, b))
    return segments


def _read_lines(path: Path) -> list[str]:
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise
    except UnicodeDecodeError as exc:
        raise DatasetError(f"{path}: not valid UTF-8 ({exc})") from exc


def read_symbols(path, alphabet: Alphabet) -> tuple[int, ...]:
    symbols = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        for tok in line.split():
            try:
                value = _parse_int(tok)
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: cannot parse symbol {tok!r}") from None
            try:
                symbols.append(alphabet.encode(value))
            except DatasetError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
    return tuple(symbols)


def read_inputs(path) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        try:
            rows.append([float(tok.replace("−", "-")) for tok in line.split()])
        except ValueError:
            raise DatasetError(f"{path}:{lineno}: cannot parse input vector") from None
        if rows and len(rows[-1]) != len(rows[0]):
            raise DatasetError(
                f"{path}:{lineno}: expected {len(rows[0])} components, got {len(rows[-1])}"
            )
    if not rows:
        return np.zeros((0, 0))
    return np.array(rows, dtype=float)


def read_mask(path) -> tuple[bool, ...]:
    mask = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        tok = line.strip()
        if not tok:
            continue
        if tok not in ("0", "1"):
            raise DatasetError(f"{path}:{lineno}: mask entries must be 0 or 1, got {tok!r}")
        mask.append(tok == "1")
    return tuple(mask)


def load_dataset(path, alphabet: Alphabet, inputs_path=None, mask_path=None) -> Dataset:
    """Read a whitespace-separated symbol file plus optional side files."""
    symbols = read_symbols(path, alphabet)
    inputs = read_inputs(inputs_path) if inputs_path is not None else None
    if inputs is not None and inputs.shape[0] != len(symbols):
        raise DatasetError(
            f"{inputs_path}: {inputs.shape[0]} input rows for {len(symbols)} symbols"
        )
    mask = read_mask(mask_path) if mask_path is not None else None
    return Dataset(symbols, alphabet, inputs=inputs, mask=mask)


def write_symbols(path, ds: Dataset) -> None:
    Path(path).write_text(
        " ".join(ds.alphabet.format(s) for s in ds.symbols) + "\n", encoding="utf-8"
    )


def write_mask(path, mask: Sequence[bool]) -> None:
    Path(path).write_text("".join("1\n" if m else "0\n" for m in mask), encoding="utf-8")


def write_inputs(path, inputs: np.ndarray) -> None:
    lines = [" ".join(repr(float(v)) for v in row) for row in inputs]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

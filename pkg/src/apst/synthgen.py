"""Synthetic motif streams with Bernoulli symbol corruption.

Randomness comes from numpy's PCG64 bit generator seeded with the spec's
seed, so a (spec, seed) pair always yields the same stream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .sequences import Alphabet, Dataset, write_mask, write_symbols

RNG_NAME = "numpy.random.PCG64"

BINARY_MOTIF = (-1, -1, 1, 1)
BINARY_MIXTURE = ((-1, -1, 1, 1), (1, -1, 1, -1))
MULTICLASS_MOTIF = (1, 2, 3, 4, 1, 3)


class MixMode(str, Enum):
    REPEAT_SINGLE = "repeat_single"
    UNIFORM_MIXTURE = "uniform_mixture"


@dataclass(frozen=True)
class MotifSpec:
    """Recipe for a corrupted motif stream.

    Motifs are given as external tokens (``-1``/``+1`` for a binary alphabet).
    ``repetitions`` drives ``repeat_single``; ``target_length`` drives
    ``uniform_mixture`` (the last block may overshoot and is truncated).
    """

    motifs: tuple
    alphabet: Alphabet = field(default_factory=lambda: Alphabet(2))
    mode: MixMode = MixMode.REPEAT_SINGLE
    repetitions: int | None = None
    target_length: int | None = None
    noise_p: float = 0.0
    seed: int = 0
    # multiclass replacement may redraw the original symbol
    redraw_includes_original: bool = True

    def __post_init__(self):
        motifs = self.motifs
        if motifs and not isinstance(motifs[0], (list, tuple)):
            motifs = (motifs,)
        motifs = tuple(tuple(int(s) for s in m) for m in motifs)
        if not motifs or any(len(m) == 0 for m in motifs):
            raise ValueError("need at least one non-empty motif")
        object.__setattr__(self, "motifs", motifs)
        object.__setattr__(self, "mode", MixMode(self.mode))
        if not 0.0 <= self.noise_p <= 1.0:
            raise ValueError(f"noise probability must lie in [0, 1], got {self.noise_p!r}")
        if self.mode is MixMode.REPEAT_SINGLE:
            if len(motifs) != 1:
                raise ValueError("repeat_single takes exactly one motif")
            if self.repetitions is None or self.repetitions < 1:
                raise ValueError("repeat_single needs repetitions >= 1")
        elif self.target_length is None or self.target_length < 1:
            raise ValueError("uniform_mixture needs target_length >= 1")
        for m in motifs:
            for tok in m:
                self.alphabet.encode(tok)

    def to_dict(self) -> dict:
        return {
            "motifs": [list(m) for m in self.motifs],
            "alphabet_size": self.alphabet.size,
            "mode": self.mode.value,
            "repetitions": self.repetitions,
            "target_length": self.target_length,
            "noise_p": self.noise_p,
            "seed": self.seed,
            "redraw_includes_original": self.redraw_includes_original,
            "rng": RNG_NAME,
        }


def _corrupt(clean: np.ndarray, spec: MotifSpec, rng: np.random.Generator):
    n = clean.size
    mask = rng.random(n) < spec.noise_p
    K = spec.alphabet.size
    out = clean.copy()
    if spec.alphabet.binary:
        out[mask] = 1 - out[mask]
    elif spec.redraw_includes_original:
        draws = rng.integers(0, K, size=n)
        out[mask] = draws[mask]
    else:
        # uniform over the K-1 other symbols
        draws = rng.integers(0, K - 1, size=n)
        shifted = draws + (draws >= clean)
        out[mask] = shifted[mask]
    return out, mask


def generate(spec: MotifSpec) -> Dataset:
    """Build the stream described by ``spec``; the mask marks every Bernoulli hit."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    encoded = [np.array([spec.alphabet.encode(tok) for tok in m], dtype=np.int64)
               for m in spec.motifs]
    if spec.mode is MixMode.REPEAT_SINGLE:
        clean = np.tile(encoded[0], spec.repetitions)
        symbols, mask = _corrupt(clean, spec, rng)
    else:
        blocks, masks, total = [], [], 0
        while total < spec.target_length:
            motif = encoded[int(rng.integers(0, len(encoded)))]
            block, m = _corrupt(motif, spec, rng)
            blocks.append(block)
            masks.append(m)
            total += motif.size
        symbols = np.concatenate(blocks)[: spec.target_length]
        mask = np.concatenate(masks)[: spec.target_length]
    return Dataset(tuple(symbols.tolist()), spec.alphabet, mask=tuple(mask.tolist()))


def clean_tiling(spec: MotifSpec) -> tuple[int, ...]:
    """The uncorrupted stream for a ``repeat_single`` spec."""
    motif = [spec.alphabet.encode(tok) for tok in spec.motifs[0]]
    return tuple(motif * spec.repetitions)


def write_generated(out_path, spec: MotifSpec, ds: Dataset, meta: dict | None = None):
    """Write ``<out>``, ``<out stem>.mask`` and ``<out stem>.json``."""
    out_path = Path(out_path)
    write_symbols(out_path, ds)
    mask_path = out_path.with_suffix(".mask")
    write_mask(mask_path, ds.mask or ())
    sidecar = {"spec": spec.to_dict(), "length": len(ds), "mask": mask_path.name}
    if meta:
        sidecar["meta"] = meta
    out_path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n",
                                             encoding="utf-8")
    return out_path, mask_path, out_path.with_suffix(".json")

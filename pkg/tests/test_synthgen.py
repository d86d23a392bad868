import json

import numpy as np
import pytest

from apst.sequences import Alphabet
from apst.synthgen import (
    BINARY_MIXTURE,
    BINARY_MOTIF,
    MULTICLASS_MOTIF,
    MixMode,
    MotifSpec,
    clean_tiling,
    generate,
    write_generated,
)


def test_noise_free_tiling():
    spec = MotifSpec(BINARY_MOTIF, repetitions=100)
    ds = generate(spec)
    assert len(ds) == 400
    assert ds.tokens() == list(BINARY_MOTIF) * 100
    assert not any(ds.mask)
    assert ds.symbols == clean_tiling(spec)


def test_full_noise_flips_everything():
    spec = MotifSpec(BINARY_MOTIF, repetitions=10, noise_p=1.0)
    ds = generate(spec)
    assert all(ds.mask)
    assert ds.tokens() == [-s for s in BINARY_MOTIF] * 10


def test_mask_density_concentrates():
    dens = [np.mean(generate(MotifSpec(BINARY_MOTIF, repetitions=100, noise_p=0.2, seed=s)).mask)
            for s in range(20)]
    assert abs(np.mean(dens) - 0.2) <= 0.04


def test_mask_marks_exact_binary_differences():
    spec = MotifSpec(BINARY_MOTIF, repetitions=50, noise_p=0.3, seed=3)
    ds = generate(spec)
    assert [a != b for a, b in zip(ds.symbols, clean_tiling(spec))] == list(ds.mask)


def test_deterministic_per_seed():
    a = generate(MotifSpec(BINARY_MOTIF, repetitions=50, noise_p=0.3, seed=11))
    b = generate(MotifSpec(BINARY_MOTIF, repetitions=50, noise_p=0.3, seed=11))
    c = generate(MotifSpec(BINARY_MOTIF, repetitions=50, noise_p=0.3, seed=12))
    assert a == b and a != c


def test_multiclass_redraw_may_keep_symbol():
    spec = MotifSpec(MULTICLASS_MOTIF, alphabet=Alphabet(5), repetitions=100, noise_p=1.0, seed=0)
    ds = generate(spec)
    same = sum(a == b for a, b in zip(ds.symbols, clean_tiling(spec)))
    # about 1/5 of the redraws land on the original symbol
    assert 60 <= same <= 180
    assert all(ds.mask)


def test_multiclass_redraw_excluding_original():
    spec = MotifSpec(MULTICLASS_MOTIF, alphabet=Alphabet(5), repetitions=100, noise_p=1.0,
                     seed=0, redraw_includes_original=False)
    ds = generate(spec)
    assert all(a != b for a, b in zip(ds.symbols, clean_tiling(spec)))
    assert set(ds.symbols) <= set(range(5))


def test_uniform_mixture_length_and_blocks():
    spec = MotifSpec(BINARY_MIXTURE, mode=MixMode.UNIFORM_MIXTURE, target_length=402, seed=5)
    ds = generate(spec)
    assert len(ds) == 402
    toks = ds.tokens()
    for j in range(0, 400, 4):
        assert tuple(toks[j:j + 4]) in BINARY_MIXTURE


@pytest.mark.parametrize("kw", [
    dict(motifs=BINARY_MOTIF),
    dict(motifs=BINARY_MOTIF, repetitions=0),
    dict(motifs=BINARY_MOTIF, repetitions=3, noise_p=1.5),
    dict(motifs=(1, 2), repetitions=3),
    dict(motifs=BINARY_MIXTURE, repetitions=3),
    dict(motifs=BINARY_MIXTURE, mode="uniform_mixture"),
    dict(motifs=()),
])
def test_bad_specs(kw):
    with pytest.raises(ValueError):
        MotifSpec(**kw)


def test_write_generated(tmp_path):
    spec = MotifSpec(BINARY_MOTIF, repetitions=5, noise_p=0.2, seed=7)
    ds = generate(spec)
    out, mask, side = write_generated(tmp_path / "s.txt", spec, ds)
    assert out.read_text().split() == [f"{t:+d}" for t in ds.tokens()]
    assert mask.read_text().split() == ["1" if m else "0" for m in ds.mask]
    meta = json.loads(side.read_text())
    assert meta["spec"]["seed"] == 7 and meta["spec"]["rng"] == "numpy.random.PCG64"
    assert meta["length"] == 20

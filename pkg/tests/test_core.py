from fractions import Fraction

import numpy as np
import pytest

from volustream.core import (QualityLadder, QualityLevel, TileSelection,
                             default_ladder, full_chunk_size, tile_size,
                             tile_size_exact)


def test_default_ladder_shape(ladder):
    assert ladder.num_levels == 6
    assert ladder.tile_count == 64
    assert ladder.top.eta == 1.0
    assert [l.eta for l in ladder.levels] == [0.1, 0.2, 0.4, 0.6, 0.8, 1.0]


def test_top_tile_size_matches_arithmetic(ladder):
    # 651e6/8 * (1/3) / 64, computed independently
    expected = 651e6 / 8.0 * (1.0 / 3.0) / 64.0
    assert tile_size(ladder.top, ladder) == round(expected) == 423828


def test_tile_size_linear_in_eta(ladder):
    top_exact = tile_size_exact(ladder.top, ladder)
    for lvl in ladder.levels:
        assert tile_size_exact(lvl, ladder) == Fraction(lvl.eta) * top_exact


def test_tile_size_strictly_increasing(ladder):
    sizes = [tile_size(l, ladder) for l in ladder.levels]
    assert all(b > a for a, b in zip(sizes, sizes[1:]))


def test_full_chunk_size(ladder):
    assert full_chunk_size(ladder) == 64 * 423828
    # sum over all tiles at top level equals the cap exactly
    assert 64 * tile_size(ladder.top, ladder) == full_chunk_size(ladder)


def test_full_chunk_single_tile_ladder():
    lad = QualityLadder(
        levels=(QualityLevel(0, 1.0, 1.0, 8.0),),
        gof_duration=1.0,
        tile_grid=(1, 1, 1),
    )
    assert full_chunk_size(lad) == tile_size(lad.top, lad) == 1_000_000


def test_doubling_gof_duration_doubles_size(ladder):
    doubled = default_ladder(gof_duration=2.0 / 3.0)
    assert tile_size_exact(doubled.top, doubled) == 2 * tile_size_exact(ladder.top, ladder)


def test_cap_level_lookup(ladder):
    assert ladder.cap_level_for(0.05) == 0
    assert ladder.cap_level_for(0.1) == 0
    assert ladder.cap_level_for(0.25) == 2
    assert ladder.cap_level_for(0.4) == 2
    assert ladder.cap_level_for(1.0) == 5


@pytest.mark.parametrize("bad", [
    dict(m=0.0, eta=0.5, bitrate_mbps=10.0),
    dict(m=0.5, eta=0.0, bitrate_mbps=10.0),
    dict(m=0.5, eta=1.1, bitrate_mbps=10.0),
    dict(m=0.5, eta=0.5, bitrate_mbps=0.0),
])
def test_quality_level_rejects_bad_fields(bad):
    with pytest.raises(ValueError):
        QualityLevel(index=0, **bad)


def test_ladder_rejects_nonmonotone():
    lv = [QualityLevel(0, 0.5, 0.5, 100.0), QualityLevel(1, 0.4, 1.0, 200.0)]
    with pytest.raises(ValueError, match="nondecreasing"):
        QualityLadder(levels=tuple(lv), gof_duration=1.0)
    lv = [QualityLevel(0, 0.5, 0.6, 100.0), QualityLevel(1, 0.6, 0.5, 200.0)]
    with pytest.raises(ValueError):
        QualityLadder(levels=tuple(lv), gof_duration=1.0)


def test_ladder_requires_full_density_top():
    with pytest.raises(ValueError, match="top level"):
        QualityLadder(levels=(QualityLevel(0, 0.5, 0.5, 100.0),), gof_duration=1.0)


def test_tile_selection_defaults_and_bytes(ladder):
    n = ladder.tile_count
    visible = np.zeros(n, dtype=bool)
    visible[:3] = True
    sel = TileSelection(levels=np.full(n, 5), visible=visible,
                        distances=np.ones(n))
    assert sel.transmit.sum() == 3
    assert sel.transmitted_bytes(ladder) == 3 * 423828


def test_tile_selection_rejects_mismatched_lengths(ladder):
    with pytest.raises(ValueError):
        TileSelection(levels=np.zeros(3, dtype=int), visible=np.ones(4, dtype=bool),
                      distances=np.ones(3))


def test_tile_selection_rejects_zero_distance_visible():
    with pytest.raises(ValueError):
        TileSelection(levels=np.zeros(2, dtype=int),
                      visible=np.array([True, False]),
                      distances=np.array([0.0, 1.0]))

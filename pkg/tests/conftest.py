import numpy as np
import pytest

from volustream import (AcuityParams, ParametricDensityMap, PsnrModel,
                        QoEWeights, default_ladder)
from volustream.sim import SessionConfig


@pytest.fixture(scope="session")
def ladder():
    return default_ladder()


@pytest.fixture(scope="session")
def acuity_params():
    return AcuityParams()


@pytest.fixture()
def session_config():
    return SessionConfig(
        ladder=default_ladder(),
        acuity=AcuityParams(),
        density_map=ParametricDensityMap(v0=0.002, alpha=2.0),
        psnr=PsnrModel(),
        weights=QoEWeights(),
    )


def random_decision_input(rng, ladder, max_tiles=8, psnr=None):
    """Shared generator for solver comparison instances."""
    from volustream.abr import ChunkDecisionInput

    nvis = int(rng.integers(1, max_tiles + 1))
    visible = np.zeros(ladder.tile_count, dtype=bool)
    visible[:nvis] = True
    return ChunkDecisionInput(
        visible=visible,
        distances=rng.uniform(0.5, 3.5, ladder.tile_count),
        eta_star=float(rng.uniform(0.08, 1.0)),
        bw_mbps=float(rng.uniform(40.0, 700.0)),
        buffer_s=float(rng.uniform(0.0, 0.67)),
        prev_q1=float(rng.uniform(15.0, 55.0)) if rng.random() < 0.9 else None,
        ladder=ladder,
        weights=QoEWeights(),
        psnr=psnr if psnr is not None else PsnrModel(),
    )

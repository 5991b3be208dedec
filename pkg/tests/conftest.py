import numpy as np
import pytest

from lirec.data import ClipRecord, Movie, MovieDataset
from lirec.synth import GenConfig, generate

DIMS = {"visual": 3, "dialog": 2, "track": 2}


def make_clip(cid, movie="m0", span=(0.0, 1.0), interaction=0, pair=(0, 1), tracks=(0, 1),
              relationship=0, dialog=True, seed=0):
    rng = np.random.default_rng(seed)
    return ClipRecord(
        id=cid, movie=movie, start=span[0], end=span[1],
        visual=rng.standard_normal((2, DIMS["visual"])),
        dialog=rng.standard_normal((1, DIMS["dialog"])) if dialog else None,
        tracks={c: rng.standard_normal((2, DIMS["track"])) for c in tracks},
        interaction=interaction, pair=pair, relationship=relationship,
    )


def make_dataset(clips, n_chars=3, n_int=4, n_rel=3, movies=None):
    ids = movies or sorted({c.movie for c in clips})
    return MovieDataset([f"a{i}" for i in range(n_int)], [f"r{i}" for i in range(n_rel)],
                        dict(DIMS), [Movie(m, [f"{m}_c{j}" for j in range(n_chars)]) for m in ids],
                        list(clips))


@pytest.fixture(scope="session")
def seed7():
    """Default desk-scale synthetic set and its planted truth."""
    return generate(GenConfig(seed=7))

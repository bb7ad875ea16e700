import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from pln.decoder import Detection, Provenance
from pln.encoder import Scene
from pln.grid import CORNER_KINDS, Box

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


@st.composite
def boxes(draw, min_side=0.0):
    x0, x1 = sorted((draw(unit), draw(unit)))
    y0, y1 = sorted((draw(unit), draw(unit)))
    if x1 - x0 < min_side or y1 - y0 < min_side:
        x1 = min(1.0, x0 + min_side) if x1 - x0 < min_side else x1
        y1 = min(1.0, y0 + min_side) if y1 - y0 < min_side else y1
    return Box(x0, y0, x1, y1)


def random_detections(rng: np.random.Generator, n: int, n_classes: int = 3, ties: bool = False) -> list[Detection]:
    dets = []
    for i in range(n):
        x0, y0 = rng.uniform(0, 0.7, size=2)
        w, h = rng.uniform(0.05, 0.3, size=2)
        score = float(rng.integers(1, 5) / 5) if ties else float(rng.random())
        dets.append(Detection(
            box=Box(float(x0), float(y0), float(x0 + w), float(y0 + h)),
            class_id=int(rng.integers(n_classes)),
            score=score,
            branch=CORNER_KINDS[int(rng.integers(4))],
            provenance=Provenance(i, 0, i, 1),
        ))
    return dets


@pytest.fixture
def one_box_scene():
    return Scene(boxes=((Box(0.25, 0.25, 0.75, 0.75), 0),), classes=("thing",))

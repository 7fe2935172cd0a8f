import numpy as np
import pytest

from uars.core import CameraView, GaussianScene, logit


def make_scene(n, seed=0, box=0.4, scale=(0.05, 0.15), opacity=(0.3, 0.9)):
    rng = np.random.default_rng(seed)
    q = rng.normal(size=(n, 4))
    return GaussianScene(
        positions=rng.uniform(-box, box, size=(n, 3)) + np.array([0.0, 0.0, 2.0]),
        rotations=q / np.linalg.norm(q, axis=1, keepdims=True),
        log_scales=np.log(rng.uniform(*scale, size=(n, 3))),
        opacity_logits=logit(rng.uniform(*opacity, size=n)),
        colors=rng.uniform(0.05, 0.95, size=(n, 3)),
    )


def make_camera(height=32, width=32, f=None):
    f = f if f is not None else 1.2 * max(height, width)
    return CameraView(f, f, width / 2, height / 2, np.eye(4), width, height)


@pytest.fixture
def small_scene():
    return make_scene(10, seed=3)


@pytest.fixture
def cam32():
    return make_camera(32, 32)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])

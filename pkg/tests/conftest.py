import numpy as np
import pytest

from cutstokes.forms import QuadConfig, assemble_all
from cutstokes.geometry import LevelSet, assign_kt, classify
from cutstokes.mesh import build_uniform_mesh
from cutstokes.spaces import build_system

BOX = ((-1.5, -1.5), (1.5, 1.5))
SHIFT = (0.0131, 0.0077)


@pytest.fixture(scope="session")
def unit_circle():
    return LevelSet.circle(0.0, 0.0, 1.0)


@pytest.fixture(scope="session")
def circle_cfg(unit_circle):
    """Shifted n=8 circle configuration used across modules."""
    mesh = build_uniform_mesh(BOX, 8, shift=SHIFT)
    cls = assign_kt(mesh, classify(mesh, unit_circle))
    return mesh, cls, unit_circle


@pytest.fixture(scope="session")
def circle_cfg_n12(unit_circle):
    mesh = build_uniform_mesh(BOX, 12, shift=(0.0, 0.0))
    cls = assign_kt(mesh, classify(mesh, unit_circle))
    return mesh, cls, unit_circle


@pytest.fixture(scope="session")
def th_system(circle_cfg):
    mesh, cls, phi = circle_cfg
    return build_system(mesh, cls, "taylor-hood-p2p1")


@pytest.fixture(scope="session")
def th_assembled(th_system, unit_circle):
    saddle, grams, cutq = assemble_all(
        th_system, unit_circle, QuadConfig(method="circle-exact"), eta=20.0,
    )
    return th_system, saddle, grams, cutq


def fitted_levelset():
    """All of the background box lies inside the domain (no cut elements)."""
    return LevelSet.from_callable(
        lambda p: np.asarray(p)[..., 0] * 0.0 - 10.0,
        lambda p: np.stack([np.ones(np.asarray(p).shape[:-1]),
                            np.zeros(np.asarray(p).shape[:-1])], axis=-1),
    )

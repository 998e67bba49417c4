import numpy as np
import pytest

from pawctl.quadruped import RobotGeometry
from pawctl.rewards import RewardConfig
from pawctl.training import configure_targets, run_curriculum

CORPUS_DIR = "tests/data/corpus"


@pytest.fixture(scope="session")
def geom():
    return RobotGeometry()


@pytest.fixture(scope="session")
def reward_cfg(geom):
    return configure_targets(RewardConfig(), geom)


@pytest.fixture(scope="session")
def trained_checkpoints(geom):
    """One trained curriculum (seed 1), shared by gesture and pipeline tests."""
    checkpoints = run_curriculum(geom, RewardConfig(), seed=1)
    return {ck.stage: ck for ck in checkpoints}


@pytest.fixture(scope="session")
def corpus_dir():
    import pathlib
    path = pathlib.Path(CORPUS_DIR)
    assert path.is_dir(), "checked-in corpus missing; run `pawctl make-corpus --out tests/data/corpus`"
    return path

import os, pytest, logging

from App.main import create_app, init_db
from App.controllers.config import buildTrainConfig
from App.controllers.datasets import synth2d

LOGGER = logging.getLogger(__name__)

# fixtures are used to setup state in the app before the test
@pytest.fixture
def registry(tmp_path):
    app = create_app({'TESTING': True, 'SQLALCHEMY_DATABASE_URI': 'sqlite:///' + str(tmp_path / 'test.db'), 'PROGRESS_BARS': False})
    init_db(app)
    yield app
    from App.models import db
    db.session.remove()

@pytest.fixture
def eightGaussians():
    return synth2d("eight_gaussians", 512, seed=3)

@pytest.fixture
def twoMoons():
    return synth2d("two_moons", 512, seed=5)

# A small, fast configuration for unit-level training runs.
@pytest.fixture
def tinyConfig():
    return buildTrainConfig({}, {
        "epochs": 2, "iters_per_epoch": 5, "clf_batch": 16, "gen_batch": 16,
        "hidden_width": 16, "hidden_layers": 2, "buffer_capacity": 64,
        "learning_rate": 1e-3, "sgld_steps": 3, "sgld_step_size": 0.1, "sgld_noise": 0.01,
        "seed": 11
    })

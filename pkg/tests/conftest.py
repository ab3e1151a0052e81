import numpy as np
import pytest

from triforge import GeneratorConfig, TrainConfig, in_memory_manifest
from triforge.records import FAKE, REAL, SampleRecord
from triforge.synth import ImageStore

import acceptance_log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def tiny_gen():
    return GeneratorConfig(identities=4, frames=6, image_size=16,
                           families=("famA", "famB"), seed=11)


@pytest.fixture
def tiny_manifest(tiny_gen):
    return in_memory_manifest(tiny_gen)


@pytest.fixture
def tiny_cfg():
    """TrainConfig factory sized for fast tests; kwargs override."""

    def make(**kwargs):
        base = dict(
            image_size=16, channels=(3, 4, 5), embed_dim=8, disc_hidden=6,
            epochs=1, batch_size=4, learning_rate=1e-3,
            included_categories=("famA", "famB"), checkpoint_every=0,
        )
        base.update(kwargs)
        return TrainConfig(**base)

    return make


@pytest.fixture
def store():
    return ImageStore()


def make_record(identity="id000", frame=0, category=REAL, ref="x.png"):
    """A record without any loadable payload, for structure-only tests."""
    authenticity = REAL if category == REAL else FAKE
    return SampleRecord(identity_id=identity, frame_index=frame,
                        authenticity=authenticity, forgery_category=category,
                        payload_ref=ref)


def frame_run(identity, category, frames):
    return [make_record(identity, f, category, f"{identity}_{category}_{f}.png")
            for f in frames]


@pytest.fixture
def records_factory():
    return make_record


@pytest.fixture
def run_factory():
    return frame_run


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

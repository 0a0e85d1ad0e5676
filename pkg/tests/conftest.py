import numpy as np
import pytest

from cdoa.aperture import ApertureConfig, build_transfer_function
from cdoa.dataset import AngleGrid, DatasetSpec, generate_dataset


@pytest.fixture(scope="session")
def small_config():
    # 4 x 4 elements, 5 x 5 plane pixels: fast but not degenerate
    return ApertureConfig(num_masks=12, aperture_size_m=0.02, element_pitch_m=0.005,
                          plane_pixels_per_side=5, seed=7)


@pytest.fixture(scope="session")
def small_tf(small_config):
    return build_transfer_function(small_config)


@pytest.fixture(scope="session")
def default_tf_500():
    return build_transfer_function(ApertureConfig(num_masks=500, seed=11))


@pytest.fixture(scope="session")
def tiny_dataset(small_tf):
    spec = DatasetSpec(samples_total=120, snr_db=40.0, seed=3, grid=AngleGrid.uniform(-30, 30, 15))
    return generate_dataset(spec, small_tf)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.REPORT:
            terminalreporter.write_line(line)

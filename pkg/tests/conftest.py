import pytest
from hypothesis import settings

from csisense import generate_dataset, load_manifest

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

SMALL_COUNTS = {"breath": 10, "walk": 10, "fall": 10, "no event": 10}


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """40 noisy segments, 7/3 train/test per class."""
    out = tmp_path_factory.mktemp("small")
    generate_dataset(11, SMALL_COUNTS, out)
    return load_manifest(out / "manifest.json")

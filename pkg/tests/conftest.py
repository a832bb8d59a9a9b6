import pytest

from logofuse.engine import build_engine
from logofuse.store import SyntheticSpec, generate_synthetic_corpus


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """A 40-logo synthetic corpus with one duplicate group, rendered once."""
    out = tmp_path_factory.mktemp("corpus")
    spec = SyntheticSpec(
        n_logos=40, duplicate_groups=1, duplicates_per_group=5, seed=99, text_fraction=0.2
    )
    manifest, groups = generate_synthetic_corpus(spec, out)
    return out, manifest, groups


@pytest.fixture(scope="session")
def small_engine(small_corpus):
    _, manifest, _ = small_corpus
    return build_engine(manifest, trees=15, seed=4)

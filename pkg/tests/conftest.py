import pytest

from ragmark.embeddings import OfflineEmbeddingProvider
from ragmark.store import Passage

# Passage fragment and target sentence used across the highlighter tests.
ARID_PASSAGE_TEXT = (
    "Bats are famous for using echolocation to hunt down their prey, using sonar "
    "sounds to capture them in the dark. Another reason for nocturnality is "
    "avoiding the heat of the day. This is especially true in arid biomes like "
    "deserts, where nocturnal behavior prevents creatures from losing precious "
    "water during the hot, dry daytime. This is an adaptation that enhances "
    "osmoregulation. One of the reasons that (cathemeral) lions prefer to hunt "
    "at night is to conserve water."
)

ARID_SENTENCE = (
    "This is especially true in arid biomes like deserts, where nocturnal "
    "behavior prevents creatures from losing precious water during the hot, "
    "dry daytime."
)


@pytest.fixture
def provider():
    return OfflineEmbeddingProvider(dimension=64, seed=0)


@pytest.fixture
def arid_passage():
    return Passage(id="arc-arid", title="Nocturnality", text=ARID_PASSAGE_TEXT)

import os

import pytest


@pytest.fixture(scope="session", autouse=True)
def grid_cache(tmp_path_factory):
    """Point the grid cache at a session-scoped temp dir."""
    path = tmp_path_factory.mktemp("grid-cache")
    os.environ["POLYHARM_CACHE_DIR"] = str(path)
    yield path

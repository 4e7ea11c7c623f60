import copy

import pytest

from dsscsim.config import load_preset


@pytest.fixture
def preset():
    """Deep copy of a shipped preset with top-level overrides applied."""

    def _load(name, **top):
        cfg = copy.deepcopy(load_preset(name))
        cfg.update(top)
        return cfg

    return _load

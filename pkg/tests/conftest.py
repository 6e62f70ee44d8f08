import os

import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.register_profile("thorough", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def small_bank():
    from piterbarg.limit_laws import PickandsBank
    return PickandsBank.simulate(1.0, [1.0, 0.5], 8.0, 400, 3)

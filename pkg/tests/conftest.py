import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from actseg import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # pay any JIT compilation cost once, up front
    kernels.warm_up()

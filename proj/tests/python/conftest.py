import os
import shutil

import pytest


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("QUICFED_CLI") or shutil.which("quicfed")
    if not path:
        pytest.skip("quicfed executable not available")
    return path

import json
from pathlib import Path

import pytest

from qnpflow.grid import load_network

NETWORK_PATH = Path(__file__).resolve().parent.parent / "networks" / "paper4bus"


@pytest.fixture(scope="session")
def base_net():
    return load_network(NETWORK_PATH)


@pytest.fixture()
def network_doc():
    """Mutable copy of the shipped network file for invalid-input tests."""
    return json.loads(NETWORK_PATH.read_text())


def write_doc(doc, tmp_path, name="net"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path

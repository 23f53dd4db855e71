from __future__ import annotations

import subprocess
import sys
import threading
from pathlib import Path

import pytest

SERVICE_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("model") / "tiny"
    subprocess.run(
        [sys.executable, str(SERVICE_ROOT / "scripts" / "make_tiny_model.py"), str(out)],
        check=True,
        capture_output=True,
    )
    return out


@pytest.fixture(scope="session")
def service_address(model_dir):
    from scorer_service.server import serve

    server = serve(str(model_dir), "127.0.0.1:0")
    host, port = server.server_address
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"{host}:{port}"
    server.shutdown()
    server.server_close()

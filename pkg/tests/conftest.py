from __future__ import annotations

import pytest

from rsagent.backends import ScriptedBackend
from rsagent.core import FileStore, Session
from rsagent.engine import Engine
from rsagent.execution import ToolExecutor
from rsagent.fixture_server import BackgroundServer, create_fixture_app
from rsagent.fixtures import build_manifest, default_scenes
from rsagent.registry import default_registry


@pytest.fixture(scope="session")
def scenes():
    return {scene.key: scene for scene in default_scenes()}


@pytest.fixture(scope="session")
def manifest(scenes):
    return build_manifest(list(scenes.values()))


@pytest.fixture(scope="session")
def fixture_server_url(manifest):
    server = BackgroundServer(create_fixture_app(manifest))
    url = server.start()
    yield url
    server.stop()


@pytest.fixture(scope="session")
def registry(fixture_server_url):
    """Default tool catalog with remote tools pointed at the live fixture server."""
    return default_registry(remote_url=fixture_server_url)


@pytest.fixture
def executor():
    return ToolExecutor()


@pytest.fixture
def fresh_session(tmp_path):
    return Session(session_id="t", store=FileStore(tmp_path / "store"))


def make_engine(tmp_path, registry, responses=None, rules=None, **kwargs):
    if rules is not None:
        template = ScriptedBackend.from_rules(rules)
    else:
        template = ScriptedBackend.from_responses(responses or [])
    return Engine(
        registry=registry,
        backend_provider=template.fork,
        store_root=tmp_path / "store",
        **kwargs,
    )

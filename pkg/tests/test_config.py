import importlib

import pytest

from src.john_forge import config

# -------- helpers --------

@pytest.fixture
def reloaded(monkeypatch):
    def load(**env):
        for k, v in env.items():
            monkeypatch.setenv(k, v)
        return importlib.reload(config)
    yield load
    monkeypatch.undo()
    importlib.reload(config)


# -------- thread cap --------

@pytest.mark.parametrize("raw", ["abc", "", "2.5"])
def test_bad_thread_count_falls_back_to_one(reloaded, raw):
    cfg = reloaded(JOHN_FORGE_THREADS=raw)
    assert cfg.JOHN_FORGE_THREADS == 1
    assert cfg.threads() == 1


def test_thread_count_is_read_and_floored(reloaded, monkeypatch):
    cfg = reloaded(JOHN_FORGE_THREADS="3")
    assert cfg.JOHN_FORGE_THREADS == 3
    monkeypatch.setenv("JOHN_FORGE_THREADS", "0")
    assert cfg.threads() == 1
    monkeypatch.setenv("JOHN_FORGE_THREADS", "nope")
    assert cfg.threads() == 3

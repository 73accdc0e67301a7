import json
import typing as t
from pathlib import Path

import pytest
from click.testing import CliRunner
from loguru import logger

from tensorgen_cli.cli.logger import configure_logger
from tensorgen_cli.core.rng import RngStream


@pytest.fixture(autouse=True)
def reset_logger() -> t.Iterator[None]:
    """Puts the stderr sink back after tests that swap the streams."""
    yield
    configure_logger()


@pytest.fixture
def caplog(caplog: pytest.LogCaptureFixture) -> t.Iterator[pytest.LogCaptureFixture]:
    """Routes loguru records to pytest's caplog."""
    handler_id = logger.add(caplog.handler, format="{message}", level=0)
    yield caplog
    logger.remove(handler_id)


@pytest.fixture
def runner() -> CliRunner:
    """A runner that keeps stdout and stderr apart."""
    try:
        return CliRunner(mix_stderr=False)  # type: ignore[call-arg]
    except TypeError:
        # click >= 8.2 always separates the streams
        return CliRunner()


@pytest.fixture
def rng() -> RngStream:
    return RngStream(seed=12345, path=("test",))


@pytest.fixture
def write_config(tmp_path: Path) -> t.Callable[[t.Dict[str, t.Any]], Path]:
    """Writes a config document to a file and returns its path."""

    def _write(document: t.Dict[str, t.Any], name: str = "config.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def small_config(tmp_path: Path) -> t.Dict[str, t.Any]:
    """A small CP config writing CSV into the test directory."""
    return {
        "seed": 7,
        "shape": [4, 5, 6],
        "model": {"type": "cp", "rank": 2},
        "generator": {"method": "randn"},
        "output": {"format": "csv", "path": str(tmp_path / "out" / "data.csv")},
    }

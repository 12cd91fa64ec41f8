import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wellbeing_policy.config import load_config  # noqa: E402
from wellbeing_policy.fixtures import shipped_fixture_dir  # noqa: E402
from wellbeing_policy.pipeline import run_pipeline  # noqa: E402


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return shipped_fixture_dir()


@pytest.fixture(scope="session")
def fixture_copy(tmp_path_factory, fixture_dir) -> Path:
    """A writable copy of the shipped fixture directory."""
    dst = tmp_path_factory.mktemp("fixture") / "takaharu"
    shutil.copytree(fixture_dir, dst, ignore=shutil.ignore_patterns("out"))
    return dst


@pytest.fixture(scope="session")
def full_run(tmp_path_factory, fixture_dir) -> Path:
    """Output directory of one complete pipeline run on the shipped fixture."""
    out = tmp_path_factory.mktemp("run") / "out"
    cfg = load_config(fixture_dir / "config.toml", overrides={"paths.out_dir": str(out)})
    run_pipeline(cfg)
    return out


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
    missing = [n for n in range(1, 7) if n not in results]
    for n in missing:
        terminalreporter.write_line(f"[FAIL] criterion {n}: did not complete")

import numpy as np
import pytest
from hypothesis import settings

from mrflow.scene import Category, SceneConfig, generate_scene

settings.register_profile("mrflow", deadline=None, max_examples=60)
settings.load_profile("mrflow")


@pytest.fixture(scope="session")
def category_scenes():
    """Four generated scenes per category."""
    out = []
    for i, cat in enumerate(Category):
        cfg = SceneConfig(seed=100 + i, category=cat.value)
        out.extend(generate_scene(cfg, j) for j in range(4))
    return out


@pytest.fixture(scope="session")
def mixed_scenes():
    cfg = SceneConfig(seed=5)
    return [generate_scene(cfg, j) for j in range(12)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion reported in the summary")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    n, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    prev = item.config._criteria.get(n)
    ok = rep.passed and (prev is None or prev[1])
    item.config._criteria[n] = (title, ok, detail or (prev[2] if prev else ""))


def pytest_terminal_summary(terminalreporter, config):
    crit = getattr(config, "_criteria", {})
    if not crit:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(crit):
        title, ok, detail = crit[n]
        line = f"criterion {n} {'PASS' if ok else 'FAIL'}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))

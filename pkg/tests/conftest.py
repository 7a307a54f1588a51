import json

import pytest

from matchplan.cli import bundled_config
from matchplan.config import RunConfig


def tiny_config_dict(workdir) -> dict:
    """A few-second pipeline: small corpus, few bins, short training."""
    d = json.loads(bundled_config("small"))
    d["workdir"] = str(workdir)
    d["synth"].update(num_docs=3000, num_queries=400, vocab_size=3000,
                      head_ranks=[5, 60], torso_ranks=[60, 600], tail_ranks=[600, 3000])
    d["bins"]["p"] = 25
    d["train"]["episodes"] = 400
    d["evaluation"].update(sample_size=60, resamples=500)
    return d


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(tiny_config_dict(tmp_path / "run")))
    return path


@pytest.fixture
def tiny_cfg(tiny_config):
    return RunConfig.from_dict(json.loads(tiny_config.read_text()))


def pytest_terminal_summary(terminalreporter):
    from criteria import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])

import numpy as np
import pytest

from gatedprice.data import assemble, build_stat_index
from gatedprice.synth import SynthConfig, generate


@pytest.fixture(scope="session")
def small_corpus():
    return generate(SynthConfig(n=1500, d_v=8, n_quality_dims=2, n_sellers=40, seed=3))


@pytest.fixture(scope="session")
def small_split(small_corpus):
    t = small_corpus.table
    perm = np.random.default_rng(0).permutation(len(t))
    tr, te = t.take(perm[:1200]), t.take(perm[1200:])
    idx = build_stat_index(tr)
    return idx, assemble(tr, idx), assemble(te, idx)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

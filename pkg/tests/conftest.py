import numpy as np
import pytest

from spectraseq import BlockSequence, BlockTensor, Spectrum, torus_laplacian_spectrum


def random_sequence(rng, sp: Spectrum, n=None, scale=None):
    n = len(sp) if n is None else n
    blocks = []
    for j in range(n):
        d = sp.dims[j]
        b = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        if scale is not None:
            b = b * scale[j]
        blocks.append(b)
    return BlockSequence(sp.label, tuple(blocks))


def random_tensor(rng, dom: Spectrum, cod: Spectrum, nd, nc, density=0.2):
    entries = {}
    for k in range(nc):
        for j in range(nd):
            if rng.random() < density:
                shape = (cod.dims[k], dom.dims[j])
                entries[(k, j)] = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return BlockTensor.between(dom, cod, entries, nd, nc)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture(scope="session")
def torus1_small():
    return torus_laplacian_spectrum(1, 40)


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion at the end of the run

_ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record pass/fail of an acceptance criterion under the given key."""

    def record(key: str, title: str):
        _ACCEPTANCE.setdefault(key, [title, None])
        request.node._criterion_key = key

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    key = getattr(item, "_criterion_key", None)
    if key is not None and rep.when == "call":
        # parametrized criteria pass only if every case passes
        prev = _ACCEPTANCE[key][1]
        _ACCEPTANCE[key][1] = rep.passed if prev is None else (prev and rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k.split(".")[0])):
        title, passed = _ACCEPTANCE[key]
        status = "PASS" if passed else ("FAIL" if passed is False else "NOT RUN")
        terminalreporter.write_line(f"[{status}] criterion {key}: {title}")

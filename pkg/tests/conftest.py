import pytest

from sfem_sif.bench import ReferenceStore, build_reference

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def store_root(tmp_path_factory):
    """Output root holding freshly built references for both specimens."""
    root = tmp_path_factory.mktemp("sfem_out")
    store = ReferenceStore(root)
    for name in ("SEN", "CEN"):
        store.save(build_reference(name))
    return root


@pytest.fixture(scope="session")
def references(store_root):
    store = ReferenceStore(store_root)
    return {name: store.load(name) for name in ("SEN", "CEN")}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

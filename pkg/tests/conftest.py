import os

# single-threaded BLAS keeps float reductions in a fixed order (bit-identical reruns)
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import pytest  # noqa: E402

from helpers import GOLDEN_CONLLU  # noqa: E402
from udseg.conllu import parse_document  # noqa: E402


@pytest.fixture
def golden():
    return parse_document(GOLDEN_CONLLU).sentences[0]


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, text = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {status:<4}  {text}")

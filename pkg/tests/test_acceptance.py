"""One test per acceptance criterion; thresholds live in mcl.harness.acceptance."""
import pytest

from mcl.harness.acceptance import CRITERIA, check


@pytest.mark.parametrize("cid", list(CRITERIA))
def test_criterion(cid):
    verdict = check(cid)
    print(verdict.line())
    assert verdict.passed, verdict.detail

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from signilp.lptext import parse_clauses, parse_program  # noqa: E402

# Worked-example facts for one stop sign and one speed-limit sign.
BK_P1 = """
color(p1,red). color(p1,white). shape(p1,octagon).
has_word(p1,p1_w1). closely_match(p1_w1,stop).
"""
BK_N1 = """
color(n1,red). color(n1,white). shape(n1,circle).
number(n1,n1_d1). digits(n1_d1,30).
"""
STOP_RULE = "traffic_sign(A,stop_sign) :- has_word(A,B), closely_match(B,stop)."


@pytest.fixture
def bk_p1():
    return parse_program(BK_P1)


@pytest.fixture
def bk_n1():
    return parse_program(BK_N1)


@pytest.fixture
def bk_both():
    return parse_program(BK_P1 + BK_N1)


@pytest.fixture
def stop_rule():
    return parse_clauses(STOP_RULE)


@pytest.fixture(scope="session")
def base_task():
    """Extracted facts and examples for the default 20+20 base corpus."""
    from signilp import factext, signscene, task
    items = signscene.generate_dataset(signscene.DatasetConfig(positives=20, negatives=20), 7)
    factsets = [factext.extract(it.raster, it.spec.sign_id) for it in items]
    bk = task.build_bk(factsets, factext.DEFAULT_LEXICON)
    pos = [it.spec.sign_id for it in items if it.label == "stop"]
    neg = [it.spec.sign_id for it in items if it.label != "stop"]
    return bk, pos, neg, factsets


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

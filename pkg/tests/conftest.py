import random

import pytest

from apst.suffix_tree import ApproxSuffixTree


def pm(text: str) -> tuple[int, ...]:
    """'-+' style string (oldest first) to internal binary symbols."""
    return tuple(0 if c in "-−" else 1 for c in text)


def fig2_tree() -> ApproxSuffixTree:
    tree = ApproxSuffixTree(2)
    scores = {"-": 2.0, "+": -1.0, "+-": 1.0, "++": 4.0, "-++": -2.0, "++++": 3.0}
    for s, g in scores.items():
        tree.upsert_path(pm(s)).g = g
    return tree


def random_tree(rng: random.Random, n_symbols: int, max_nodes: int = 64,
                max_len: int = 8) -> ApproxSuffixTree:
    tree = ApproxSuffixTree(n_symbols)
    for _ in range(rng.randint(0, 40)):
        s = [rng.randrange(n_symbols) for _ in range(rng.randint(1, max_len))]
        trial = tree.copy()
        trial.upsert_path(s)
        if trial.node_count > max_nodes:
            break
        node = tree.upsert_path(s)
        node.g = rng.uniform(-2, 2)
    return tree


@pytest.fixture
def fig2():
    return fig2_tree()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

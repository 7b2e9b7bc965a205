import math

import pytest

from hype_attention.tensor import random_fill


def naive_matmul(a, b):
    rows, inner, cols = len(a), len(b), len(b[0])
    return [[math.fsum(float(a[i][k]) * float(b[k][j]) for k in range(inner))
             for j in range(cols)] for i in range(rows)]


def naive_attention(Q, K, V, bias=None, causal=False):
    """Per-row loop over plain Python floats."""
    L, d = len(Q), len(Q[0])
    out = []
    for i in range(L):
        logits = []
        for j in range(L):
            if causal and j > i:
                continue
            s = sum(float(Q[i][c]) * float(K[j][c]) for c in range(d)) / math.sqrt(d)
            if bias is not None:
                s += float(bias[i][j])
            logits.append(s)
        top = max(logits)
        w = [math.exp(s - top) for s in logits]
        total = sum(w)
        out.append([sum(w[j] / total * float(V[j][c]) for j in range(len(w)))
                    for c in range(len(V[0]))])
    return out


@pytest.fixture
def qkv():
    def make(L, d, seed=0, width="f64"):
        return (random_fill(L, d, seed, width=width), random_fill(L, d, seed + 1, width=width),
                random_fill(L, d, seed + 2, width=width))
    return make


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)

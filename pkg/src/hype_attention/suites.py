"""Verification suites driven by a :class:`RunConfig`.

Each suite returns a list of :class:`Check` records. A suite that raises
(for instance on overflow) is reported as a single failed check carrying
the diagnostic.
"""

from __future__ import annotations

import contextvars
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .attention import (AttentionConfig, attend_grid, attend_hype_concat, attend_multihead,
                        attend_with_bias, head_output)
from .checks import equivalence_error, max_rel_error
from .config import RunConfig
from .encoding import (GridShape, HypeHeadParams, build_bias_alibi, build_bias_grid,
                       build_bias_hype)
from .gradcheck import attention_param_grads, finite_difference_param_grads, relative_gap
from .tensor import NonFiniteError, matmul, random_fill

GRID_SHAPES = [(3, 4), (4, 4, 2), (2, 2, 2, 2)]
STACKING = (1, 2, 4, 8)
GRID_MU = 0.1
# below this |mu*(j-i)| the cubic term drowns in sinh's own rounding
ALIBI_X_FLOOR = 1e-5


@dataclass
class Check:
    name: str
    value: float
    bound: float
    passed: bool
    detail: str = ""

    def __post_init__(self):
        self.value, self.bound, self.passed = float(self.value), float(self.bound), bool(self.passed)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if self.detail:
            return f"{status} {self.name}: {self.detail}"
        return f"{status} {self.name}: {self.value:.3e} <= {self.bound:.3e}"


def _within(name, value, bound) -> Check:
    return Check(name, value, bound, value <= bound)


def _qkv(L, d, seed, width):
    return (random_fill(L, d, seed, width=width), random_fill(L, d, seed + 1, width=width),
            random_fill(L, d, seed + 2, width=width))


def suite_equivalence(cfg: RunConfig):
    checks = []
    Q, K, V = _qkv(cfg.L, cfg.d, cfg.seed, cfg.width)
    for h, p in enumerate(cfg.head_params):
        err = equivalence_error(Q, K, p, cfg.n_copies)
        checks.append(_within(f"equivalence.logits[head={h}]", err, cfg.tol_equivalence))
        concat = attend_hype_concat(Q, K, V, p, cfg.n_copies, causal=cfg.causal)
        explicit = attend_with_bias(Q, K, V, build_bias_hype(cfg.L, p, width=cfg.width),
                                    causal=cfg.causal)
        checks.append(_within(f"equivalence.output[head={h}]",
                              max_rel_error(concat, explicit), cfg.tol_attention))

    d_model = cfg.d * cfg.heads
    X = random_fill(cfg.L, d_model, cfg.seed + 10, width=cfg.width)
    weights = [tuple(random_fill(d_model, cfg.d, cfg.seed + 100 + 3 * h + i, width=cfg.width)
                     for i in range(3)) for h in range(cfg.heads)]
    att = AttentionConfig(cfg.L, cfg.d, cfg.heads, cfg.head_params, cfg.causal,
                          cfg.n_copies, cfg.width)
    out = attend_multihead(X, weights, att)
    for h, p in enumerate(cfg.head_params):
        Wq, Wk, Wv = weights[h]
        ref = attend_with_bias(matmul(X, Wq), matmul(X, Wk), matmul(X, Wv),
                               build_bias_hype(cfg.L, p, width=cfg.width), causal=cfg.causal)
        checks.append(_within(f"equivalence.multihead[head={h}]",
                              max_rel_error(head_output(out, h, cfg.d), ref), cfg.tol_attention))
    return checks


def suite_antisymmetry(cfg: RunConfig):
    checks = []
    for h, p in enumerate(cfg.head_params):
        a = build_bias_hype(cfg.L, p, width=cfg.width).values
        ok = bool(np.array_equal(a, -a.T) and np.all(np.diag(a) == 0))
        checks.append(Check(f"antisymmetry[head={h}]", float(np.max(np.abs(a + a.T))), 0.0, ok,
                            "" if ok else "bias is not exactly antisymmetric"))
    return checks


def suite_alibi(cfg: RunConfig):
    checks = []
    x = np.arange(cfg.L)[None, :] - np.arange(cfg.L)[:, None]
    for h, p in enumerate(cfg.head_params):
        hype = build_bias_hype(cfg.L, HypeHeadParams(p.mu, 1.0)).values
        alibi = build_bias_alibi(cfg.L, p.mu).values
        err = np.abs(hype - alibi)
        ax = np.abs(p.mu * x)
        loose = (ax <= 1) & (ax >= ALIBI_X_FLOOR)
        excess = np.max((err - ax ** 3 * math.sinh(1))[loose], initial=0.0)
        checks.append(Check(f"alibi.loose_bound[head={h}]", float(excess), 0.0, excess <= 0,
                            f"max(err - |x|^3 sinh 1) = {excess:.3e} <= 0"))
        tight = (ax <= 0.1) & (ax >= ALIBI_X_FLOOR)
        ratio = np.max(err[tight] / ax[tight] ** 3, initial=0.0)
        bound = cfg.alibi_tight_factor / 6
        checks.append(_within(f"alibi.tight_coefficient[head={h}]", ratio, bound))
    return checks


def suite_stacking(cfg: RunConfig):
    checks = []
    Q, K, V = _qkv(cfg.L, cfg.d, cfg.seed, "f64")
    for h, p in enumerate(cfg.head_params):
        base = attend_hype_concat(Q, K, V, p, 1, causal=cfg.causal)
        for n in STACKING[1:]:
            out = attend_hype_concat(Q, K, V, p, n, causal=cfg.causal)
            checks.append(_within(f"stacking[head={h},n={n}]", max_rel_error(out, base),
                                  cfg.tol_stacking))
    return checks


def suite_grid(cfg: RunConfig):
    checks = []
    for dims in GRID_SHAPES:
        shape = GridShape(dims)
        params = [HypeHeadParams(GRID_MU / (i + 1), 1.0) for i in range(shape.ndim)]
        Q, K, V = _qkv(shape.size, cfg.d, cfg.seed + 7, "f64")
        concat = attend_grid(Q, K, V, shape, params, causal=cfg.causal)
        explicit = attend_with_bias(Q, K, V, build_bias_grid(shape, params), causal=cfg.causal)
        label = "x".join(map(str, dims))
        checks.append(_within(f"grid[{label}]", max_rel_error(concat, explicit), cfg.tol_grid))
    # a 1-D grid must reduce exactly to the sequence case
    Q, K, V = _qkv(cfg.L, cfg.d, cfg.seed, "f64")
    p = cfg.head_params[0]
    same = np.array_equal(attend_grid(Q, K, V, GridShape((cfg.L,)), [p], causal=cfg.causal),
                          attend_hype_concat(Q, K, V, p, causal=cfg.causal))
    checks.append(Check("grid[1-D reduction]", 0.0, 0.0, same,
                        "bit-identical to sequence path" if same else "1-D grid differs"))
    return checks


def suite_gradient(cfg: RunConfig):
    checks = []
    L, d = min(cfg.L, 64), min(cfg.d, 8)
    Q, K, V = _qkv(L, d, cfg.seed + 20, "f64")
    for h, p in enumerate(cfg.head_params):
        explicit = attention_param_grads(Q, K, V, p, causal=cfg.causal)
        concat = attention_param_grads(Q, K, V, p, causal=cfg.causal, path="concat")
        fd = finite_difference_param_grads(Q, K, V, p, causal=cfg.causal)
        for name in ("d_mu", "d_tau"):
            a, c, f = getattr(explicit, name), getattr(concat, name), getattr(fd, name)
            checks.append(_within(f"gradient.fd[head={h},{name}]", relative_gap(a, f),
                                  cfg.tol_grad_fd))
            checks.append(_within(f"gradient.paths[head={h},{name}]", relative_gap(a, c),
                                  cfg.tol_grad_paths))
    return checks


SUITES = {
    "equivalence": suite_equivalence,
    "antisymmetry": suite_antisymmetry,
    "alibi": suite_alibi,
    "stacking": suite_stacking,
    "grid": suite_grid,
    "gradient": suite_gradient,
}


def _run_one(name, cfg):
    try:
        return SUITES[name](cfg)
    except NonFiniteError as exc:
        return [Check(f"{name}.overflow", 0.0, 0.0, False, str(exc))]


def run_suites(cfg: RunConfig, parallel: bool = False) -> dict:
    """Run every suite and collect a JSON-ready report."""
    names = list(SUITES)
    if parallel:
        with ThreadPoolExecutor(max_workers=len(names)) as pool:
            futures = [pool.submit(contextvars.copy_context().run, _run_one, n, cfg)
                       for n in names]
            results = [f.result() for f in futures]
    else:
        results = [_run_one(n, cfg) for n in names]
    all_checks = [c for checks in results for c in checks]
    failed = [c for c in all_checks if not c.passed]
    return {
        "config": cfg.as_dict(),
        "passed": not failed,
        "first_failure": failed[0].line() if failed else None,
        "suites": {n: [asdict(c) for c in checks] for n, checks in zip(names, results)},
        "lines": [c.line() for c in all_checks],
    }

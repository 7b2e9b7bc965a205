"""Storage and timing benchmark: eta concatenation vs explicit L x L masks."""

from __future__ import annotations

import statistics
import time
from dataclasses import asdict, dataclass

from .attention import AttentionConfig, attend_multihead
from .checks import max_rel_error
from .config import MAX_BENCH_L, ConfigError, RunConfig
from .instrument import count_pe_storage
from .tensor import random_fill


class BenchRefused(ConfigError):
    """The requested run exceeds the desk-scale size cap."""


class BenchFailure(AssertionError):
    """A report invariant does not hold."""


@dataclass
class BenchReport:
    config: dict
    stored_pe_values_hype: int
    stored_pe_values_explicit: int
    wall_time_concat: float
    wall_time_explicit: float
    max_equivalence_error: float
    width: str
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def _inputs(cfg: RunConfig):
    d_model = cfg.d * cfg.heads
    X = random_fill(cfg.L, d_model, cfg.seed, width=cfg.width)
    weights = [tuple(random_fill(d_model, cfg.d, cfg.seed + 1 + 3 * h + i, width=cfg.width)
                     for i in range(3)) for h in range(cfg.heads)]
    return X, weights


def _timed(fn, trials):
    times = []
    for _ in range(trials):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return statistics.median(times)


def run_bench(cfg: RunConfig) -> BenchReport:
    """Measure both paths and check the report invariants.

    Storage counts come from the allocation counters inside the encoding
    builders. Raises :class:`BenchFailure` (after the report is built) when
    a count or the cross-path error is off; the report is attached as
    ``exc.report``.
    """
    cap = MAX_BENCH_L[cfg.width]
    if cfg.L > cap:
        raise BenchRefused(
            f"L={cfg.L} exceeds the {cfg.width} cap of {cap}: the explicit path needs "
            f"several {cfg.L}x{cfg.L} working matrices per head")
    if cfg.trials < 5:
        raise ConfigError(f"bench needs trials >= 5 for a median, got {cfg.trials}")

    X, weights = _inputs(cfg)
    att = AttentionConfig(cfg.L, cfg.d, cfg.heads, cfg.head_params, cfg.causal,
                          cfg.n_copies, cfg.width)

    with count_pe_storage() as concat_count:
        concat = attend_multihead(X, weights, att, path="concat")
    with count_pe_storage() as explicit_count:
        explicit = attend_multihead(X, weights, att, path="explicit")

    report = BenchReport(
        config=cfg.as_dict(),
        stored_pe_values_hype=concat_count.total,
        stored_pe_values_explicit=explicit_count.total,
        wall_time_concat=_timed(lambda: attend_multihead(X, weights, att, path="concat"),
                                cfg.trials),
        wall_time_explicit=_timed(lambda: attend_multihead(X, weights, att, path="explicit"),
                                  cfg.trials),
        max_equivalence_error=max_rel_error(concat, explicit),
        width=cfg.width,
        seed=cfg.seed,
    )

    problems = []
    expected_hype = 4 * cfg.n_copies * cfg.L * cfg.heads
    if report.stored_pe_values_hype != expected_hype:
        problems.append(f"concat path stored {report.stored_pe_values_hype} values, "
                        f"expected 4*n*L*h = {expected_hype}")
    expected_explicit = cfg.L ** 2 * len(set(cfg.head_params))
    if report.stored_pe_values_explicit != expected_explicit:
        problems.append(f"explicit path stored {report.stored_pe_values_explicit} values, "
                        f"expected {expected_explicit}")
    if not report.max_equivalence_error <= cfg.tol_attention:
        problems.append(f"cross-path error {report.max_equivalence_error:.3e} exceeds "
                        f"{cfg.tol_attention:.3e}")
    if problems:
        exc = BenchFailure("; ".join(problems))
        exc.report = report
        raise exc
    return report

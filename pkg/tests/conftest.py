import re
import time

import numpy as np
import pytest

from clothstate.metrics import evaluate
from clothstate.synth import DatasetEntry, FoldSpec, apply_fold, generate_dataset

CLEAN_SHAPES = ("square", "rectangle", "tshirt", "trousers")
CLEAN_SEED = 0
NOISY_SEED = 0

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion."""
    rows = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if not m:
                continue
            if rep.when != "call" and rep.outcome == "passed":
                continue
            props = dict(rep.user_properties)
            n = int(m.group(1))
            ok = rep.outcome == "passed" and rows.get(n, (True,))[0]
            rows[n] = (ok, props.get("summary", ""), props.get("measured", ""))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(rows):
        ok, summary, measured = rows[n]
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {summary}"
        if measured:
            line += f"  [{measured}]"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def clean_samples():
    entries = [DatasetEntry(s) for s in CLEAN_SHAPES]
    return generate_dataset(entries, 46, CLEAN_SEED)


@pytest.fixture(scope="session")
def clean_report(clean_samples):
    t0 = time.perf_counter()
    report = evaluate(clean_samples, threads=0)
    return report, time.perf_counter() - t0


def mirror_sample(sample):
    """The same fold line with the other side folded."""
    f = sample.meta["fold"]
    side = "right" if f["side"] == "left" else "left"
    spec = FoldSpec(tuple(f["point"]), tuple(f["direction"]), side, f["layer_height"])
    out = apply_fold(sample.start, spec, sample.corners)
    out.meta = dict(sample.meta)
    return out


@pytest.fixture(scope="session")
def mirror_report(clean_samples):
    return evaluate([mirror_sample(s) for s in clean_samples], threads=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

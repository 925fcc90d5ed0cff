import sys
import time
from dataclasses import dataclass
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ROOT = Path(__file__).resolve().parents[1]
CASE_STUDY = ROOT / "configs" / "case_study.yaml"
VERDICTS = pytest.StashKey[dict]()


@dataclass
class CaseStudy:
    cfg: object
    ts: object
    lib: object
    report: dict
    seconds: float
    cache: Path
    plans: dict


@pytest.fixture(scope="session")
def case_study(tmp_path_factory):
    """The example scenario, abstracted once from scratch and cached to disk."""
    from tubeltl.abstraction import build, save_cache
    from tubeltl.config import load_config
    from tubeltl.ltl import plan

    cfg = load_config(CASE_STUDY)
    t0 = time.perf_counter()
    ts, lib, report = build(cfg.model, cfg.workspace, cfg.init_region, cfg.shape, cfg.abstraction)
    seconds = time.perf_counter() - t0
    cache = tmp_path_factory.mktemp("cache") / "case_study.json"
    save_cache(cache, cfg.abstraction_key(), ts, lib, report)
    plans = {name: plan(ts, f) for name, f in cfg.formulas.items()}
    return CaseStudy(cfg, ts, lib, report, seconds, cache, plans)


@pytest.fixture
def criterion(request):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    verdicts = request.config.stash.setdefault(VERDICTS, {})

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        verdicts[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    verdicts = config.stash.get(VERDICTS, {})
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for n in sorted(verdicts):
            terminalreporter.write_line(verdicts[n])

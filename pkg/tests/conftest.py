import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    def record(number, name, ok, detail=""):
        ACCEPTANCE_LINES.append((number, name, ok, detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda r: r[0]):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {name}: {detail}")


@pytest.fixture(scope="session")
def default_pipeline():
    """collect -> train on the default cluster with seed 42 (shared, read-only)."""
    from netsched import harness
    from netsched.simulator import init_cluster

    cluster = init_cluster(seed=42)
    data = harness.collect_dataset(cluster, harness.generate_matrix(42))
    return data, harness.train_all(data.dataset, split_seed=42)


@pytest.fixture
def prom_server():
    from promstub import serve

    with serve() as handle:
        yield handle


def run_cli_pipeline(workdir, seed=42, trials=200):
    """collect -> train -> evaluate through the CLI entry point; returns timings."""
    import time

    from netsched.cli import main

    timings = {}
    steps = {
        "collect": ["collect", "--seed", str(seed), "--out", str(workdir / "data")],
        "train": ["train", "--seed", str(seed), "--dataset", str(workdir / "data" / "dataset.csv"),
                  "--model-dir", str(workdir / "models")],
        "evaluate": ["evaluate", "--seed", str(seed), "--model-dir", str(workdir / "models"),
                     "--out", str(workdir / "results"), "--trials", str(trials)],
    }
    for name, argv in steps.items():
        t0 = time.perf_counter()
        rc = main(argv)
        timings[name] = time.perf_counter() - t0
        assert rc == 0, f"{name} exited with {rc}"
    return timings


@pytest.fixture(scope="session")
def cli_pipelines(tmp_path_factory):
    """Two independent seed-42 CLI pipeline runs."""
    runs = []
    for label in ("first", "second"):
        workdir = tmp_path_factory.mktemp(label)
        runs.append((workdir, run_cli_pipeline(workdir)))
    return runs

import json

import numpy as np
import pytest
from pytest_check import check

from src.device_model import Role, build_device
from src.errors import DegeneratePair, EmptyKeptSet, InvalidTrialCount, SimulationError
from src.experiment_sim import (
    RngSeed,
    discard_z,
    expected_discard_fraction,
    run_experiment,
    substream_seed,
    tabulate,
)
from src.operator_core import basis_ket, identity, projector
from src.scenarios import PLUS
from utils.config import DirPath

GOLDEN_FILE = "biased_pair_seed1_counts.json"


def test_frequencies_match_joint(biased_pair):
    prep, meas = biased_pair
    log = run_experiment(prep, meas, 100_000, seed=1)
    freq = tabulate(log, prep, meas)
    assert log.n_discarded == 0
    assert freq.kept_total == 100_000
    with check:
        assert freq.max_abs_z <= 5.0
    with check:
        assert freq.max_abs_error <= 0.01
    assert int(freq.counts.sum()) == freq.kept_total


@pytest.mark.parametrize("chunks", [1, 4, 16])
def test_chunking_does_not_change_counts(biased_pair, chunks):
    prep, meas = biased_pair
    reference = tabulate(run_experiment(prep, meas, 50_000, seed=99, chunks=1), prep, meas)
    chunked = tabulate(
        run_experiment(prep, meas, 50_000, seed=99, chunks=chunks, threads=4), prep, meas
    )
    assert np.array_equal(reference.counts, chunked.counts)


def test_runs_are_reproducible(biased_pair):
    prep, meas = biased_pair
    a = run_experiment(prep, meas, 10_000, seed=12345)
    b = run_experiment(prep, meas, 10_000, seed=12345)
    c = run_experiment(prep, meas, 10_000, seed=12346)
    assert np.array_equal(a.prep_index, b.prep_index)
    assert np.array_equal(a.k_index, b.k_index)
    assert not np.array_equal(a.k_index, c.k_index)


def test_golden_counts(biased_pair, record_golden):
    """固定种子的计数必须与 tests/golden 下记录的逐位一致；--record-golden 时重新记录"""
    prep, meas = biased_pair
    counts = tabulate(run_experiment(prep, meas, 100_000, seed=1), prep, meas).counts.tolist()
    path = DirPath().golden_dir / GOLDEN_FILE
    if record_golden:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"seed": 1, "n_trials": 100_000, "counts": counts}) + "\n")
    if not path.exists():
        pytest.fail(f"缺少基准计数 {path}，用 pytest --record-golden 记录")
    golden = json.loads(path.read_text())
    assert (golden["seed"], golden["n_trials"]) == (1, 100_000)
    assert golden["counts"] == counts


def test_no_measurement_device_never_discards(biased_pair):
    prep, _ = biased_pair
    meas = build_device(Role.MEASUREMENT, {"1": identity(2)})
    log = run_experiment(prep, meas, 20_000, seed=3)
    assert log.n_discarded == 0
    assert expected_discard_fraction(prep, meas) == pytest.approx(0.0, abs=1e-12)


def test_deterministic_chain():
    prep = build_device(Role.PREPARATION, {"1": projector(basis_ket(2, 0))})
    meas = build_device(
        Role.MEASUREMENT, {"1": projector(basis_ket(2, 0)), "2": projector(basis_ket(2, 1))}
    )
    log = run_experiment(prep, meas, 5_000, seed=8)
    frame = log.to_frame()
    assert set(frame["i"]) == {"1"}
    assert set(frame["k"]) == {"1"}
    freq = tabulate(log, prep, meas)
    assert freq.counts.tolist() == [[5_000, 0]]


def test_heavily_biased_measurement_discards(biased_pair):
    prep, _ = biased_pair
    meas = build_device(Role.MEASUREMENT, {"1": projector(PLUS).scaled(0.1)})
    log = run_experiment(prep, meas, 100_000, seed=5)
    assert expected_discard_fraction(prep, meas) == pytest.approx(0.95, abs=1e-12)
    assert abs(discard_z(log, prep, meas)) <= 5.0
    freq = tabulate(log, prep, meas)
    assert freq.kept_total == log.n_trials - log.n_discarded


def test_log_records(biased_pair):
    prep, meas = biased_pair
    log = run_experiment(prep, meas, 10, seed=2)
    records = list(log.records())
    assert [r.trial for r in records] == list(range(10))
    assert list(log.to_frame().columns) == ["trial", "i", "k"]
    assert all(r.k in ("0", "1", "2") for r in records)


@pytest.mark.parametrize("n_trials", [0, -5, 2.5, True])
def test_invalid_trial_count(biased_pair, n_trials):
    with pytest.raises(InvalidTrialCount):
        run_experiment(*biased_pair, n_trials, seed=1)


def test_seed_range():
    with pytest.raises(SimulationError):
        RngSeed(-1)
    assert substream_seed(7, 0) == 7
    assert RngSeed(2**64 - 1).substream(1) == (2**64 - 1) ^ 0x9E3779B97F4A7C15


def test_degenerate_pair_is_refused():
    prep = build_device(Role.PREPARATION, {"1": projector(basis_ket(2, 0))})
    meas = build_device(Role.MEASUREMENT, {"1": projector(basis_ket(2, 1))})
    with pytest.raises(DegeneratePair):
        run_experiment(prep, meas, 100, seed=1)


def test_tabulate_rejects_foreign_log(biased_pair):
    prep, meas = biased_pair
    log = run_experiment(prep, meas, 100, seed=1)
    other = build_device(Role.MEASUREMENT, {"a": identity(2)})
    with pytest.raises(SimulationError):
        tabulate(log, prep, other)


def test_all_trials_discarded(biased_pair):
    prep, _ = biased_pair
    meas = build_device(Role.MEASUREMENT, {"1": projector(PLUS).scaled(1e-6)})
    log = run_experiment(prep, meas, 1, seed=1)
    assert log.n_discarded == 1
    with pytest.raises(EmptyKeptSet) as e:
        tabulate(log, prep, meas)
    assert e.value.exit_code == 8


def test_tiny_prior_event_is_simulated(tiny_prior_pair):
    prep, meas = tiny_prior_pair
    log = run_experiment(prep, meas, 20_000, seed=4)
    freq = tabulate(log, prep, meas)
    assert log.n_discarded == 0
    assert freq.kept_total == 20_000
    assert freq.counts[1].sum() == 0
    assert freq.max_abs_z <= 5.0
    assert expected_discard_fraction(prep, meas) == pytest.approx(0.0, abs=1e-12)

import numpy as np
import pytest
from pytest_check import check

from src.device_model import (
    Role,
    a_priori_distribution,
    build_device,
    mdo_to_pom,
    pdo_to_density,
    preparation_pom,
    retr_density,
)
from src.errors import DegeneratePair, UndefinedConditional
from src.operator_core import basis_ket, identity, projector
from src.probability_engine import (
    GivenAxis,
    bayes_deviation,
    detection_probability,
    joint,
    marginal_meas,
    marginal_meas_direct,
    marginal_prep,
    marginal_prep_direct,
    predictive,
    predictive_bayes,
    retrodictive,
    retrodictive_bayes,
    retrodictive_unbiased,
)
from src.scenarios import appendix_equivalence
from tests.factories import random_device, random_pair


def test_joint_biased_pair(biased_pair):
    jd = joint(*biased_pair)
    assert jd.p == pytest.approx(np.array([[0.3, 0.3], [0.2, 0.2]]), abs=1e-12)
    assert jd.denominator == pytest.approx(1.0)
    assert jd.to_frame().loc["1", "2"] == pytest.approx(0.3)


def test_marginals(biased_pair):
    prep, meas = biased_pair
    jd = joint(prep, meas)
    with check:
        assert marginal_prep(jd).to_numpy() == pytest.approx([0.6, 0.4], abs=1e-12)
    with check:
        assert marginal_meas(jd).to_numpy() == pytest.approx([0.5, 0.5], abs=1e-12)
    with check:
        assert np.allclose(marginal_prep(jd), marginal_prep_direct(prep, meas), atol=1e-12)
    with check:
        assert np.allclose(marginal_meas(jd), marginal_meas_direct(prep, meas), atol=1e-12)


def test_conditionals(biased_pair):
    jd = joint(*biased_pair)
    pred, retr = predictive(jd), retrodictive(jd)
    assert pred.given_axis is GivenAxis.GIVEN_PREP
    assert pred.row("1") == pytest.approx([0.5, 0.5])
    assert retr.prob("1", "2") == pytest.approx(0.6)
    assert bayes_deviation(jd) <= 1e-12


def test_orthogonal_supports_are_degenerate():
    prep = build_device(Role.PREPARATION, {"1": projector(basis_ket(2, 0))})
    meas = build_device(Role.MEASUREMENT, {"1": projector(basis_ket(2, 1))})
    with pytest.raises(DegeneratePair):
        joint(prep, meas)


def test_undefined_rows_are_marked():
    prep = build_device(Role.PREPARATION, {"1": projector(basis_ket(2, 0))})
    meas = build_device(
        Role.MEASUREMENT,
        {"1": projector(basis_ket(2, 0)), "2": projector(basis_ket(2, 1))},
    )
    retr = retrodictive(joint(prep, meas))
    assert retr.undefined_rows == frozenset({"2"})
    assert retr.prob("1", "1") == 1.0
    assert retr.to_frame().loc["2", "1"] is None
    with pytest.raises(UndefinedConditional):
        retr.row("2")


def test_orthonormal_measurement_gives_kronecker_retrodiction(biased_pair):
    prep, _ = biased_pair
    meas = build_device(
        Role.MEASUREMENT,
        {"1": projector(basis_ket(2, 0)), "2": projector(basis_ket(2, 1))},
    )
    retr = retrodictive(joint(prep, meas))
    assert retr.row("1") == pytest.approx([1.0, 0.0])
    assert retr.row("2") == pytest.approx([0.0, 1.0])


def test_no_measurement_retrodiction_is_prior(rng):
    prep = random_device(Role.PREPARATION, 3, 4, rng)
    meas = build_device(Role.MEASUREMENT, {"1": identity(3)})
    retr = retrodictive(joint(prep, meas))
    assert np.max(np.abs(retr.row("1") - a_priori_distribution(prep).to_numpy())) <= 1e-12


def test_unbiased_reductions(spin_half_prep):
    meas = build_device(Role.MEASUREMENT, {"plus": projector((1, 1)), "minus": projector((1, -1))})
    pom = mdo_to_pom(meas)
    rho_up = pdo_to_density(spin_half_prep, "up")
    assert detection_probability(rho_up, pom, "plus") == pytest.approx(0.5)
    xi = preparation_pom(spin_half_prep)
    assert retrodictive_unbiased(xi, retr_density(meas, "plus"), "up") == pytest.approx(0.5)
    jd = joint(spin_half_prep, meas)
    assert retrodictive(jd).max_deviation(retrodictive_bayes(spin_half_prep, meas)) <= 1e-12
    assert predictive(jd).max_deviation(predictive_bayes(spin_half_prep, meas)) <= 1e-12


# ---------------------------------------------------------------- 随机装置对上的性质
@pytest.mark.parametrize("seed", range(200))
def test_joint_properties_on_random_pairs(seed):
    prep, meas = random_pair(seed)
    jd = joint(prep, meas)
    with check:
        assert np.all(jd.p >= 0.0)
    with check:
        assert abs(jd.p.sum() - 1.0) <= 1e-12
    with check:
        assert bayes_deviation(jd) <= 1e-12
    with check:
        assert appendix_equivalence(prep, meas) <= 1e-10
    with check:
        assert np.allclose(marginal_prep(jd), marginal_prep_direct(prep, meas), atol=1e-12)
    with check:
        assert np.allclose(marginal_meas(jd), marginal_meas_direct(prep, meas), atol=1e-12)
    for table in (predictive(jd), retrodictive(jd)):
        for given in table.given_labels:
            if table.is_defined(given):
                with check:
                    assert abs(table.row(given).sum() - 1.0) <= 1e-12


@pytest.mark.parametrize("seed", range(50))
def test_joint_is_gauge_invariant(seed):
    prep, meas = random_pair(seed)
    rng = np.random.default_rng(seed + 10_000)
    a, b = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), size=2))
    base = joint(prep, meas).p
    scaled = joint(prep.scaled(a), meas.scaled(b)).p
    assert np.max(np.abs(base - scaled)) <= 1e-12


@pytest.mark.parametrize("seed", range(100))
def test_unbiased_reductions_on_random_pairs(seed):
    prep, meas = random_pair(seed, prep_unbiased=True, meas_unbiased=True)
    jd = joint(prep, meas)
    assert retrodictive(jd).max_deviation(retrodictive_bayes(prep, meas)) <= 1e-12
    assert predictive(jd).max_deviation(predictive_bayes(prep, meas)) <= 1e-12


@pytest.mark.parametrize("seed", range(100))
def test_predictive_is_detection_probability_for_unbiased_measurement(seed):
    prep, meas = random_pair(seed, meas_unbiased=True)
    pred = predictive(joint(prep, meas))
    pom = mdo_to_pom(meas)
    for i in prep.labels:
        rho_i = pdo_to_density(prep, i)
        for j in meas.labels:
            assert pred.prob(j, i) == pytest.approx(detection_probability(rho_i, pom, j), abs=1e-12)


@pytest.mark.parametrize("seed", range(100))
def test_marginal_prep_is_prior_for_unbiased_measurement(seed):
    prep, meas = random_pair(seed, meas_unbiased=True)
    p_i = marginal_prep(joint(prep, meas)).to_numpy()
    assert np.max(np.abs(p_i - a_priori_distribution(prep).to_numpy())) <= 1e-12


@pytest.mark.parametrize("seed", range(100))
def test_retrodictive_is_unbiased_formula_for_unbiased_preparation(seed):
    prep, meas = random_pair(seed, prep_unbiased=True)
    retr = retrodictive(joint(prep, meas))
    xi = preparation_pom(prep)
    for j in meas.labels:
        rho_j = retr_density(meas, j)
        for i in prep.labels:
            assert retr.prob(i, j) == pytest.approx(retrodictive_unbiased(xi, rho_j, i), abs=1e-12)


def test_bayes_with_tiny_prior_event(tiny_prior_pair):
    prep, meas = tiny_prior_pair
    bayes = retrodictive_bayes(prep, meas)
    assert bayes.undefined_rows == frozenset()
    assert retrodictive(joint(prep, meas)).max_deviation(bayes) <= 1e-12


def test_bayes_with_tiny_measurement_event(spin_half_prep):
    meas = build_device(
        Role.MEASUREMENT,
        {"a": projector(basis_ket(2, 0)), "b": projector(basis_ket(2, 1)).scaled(1e-10)},
    )
    bayes = predictive_bayes(spin_half_prep, meas)
    assert bayes.row("down") == pytest.approx([0.0, 1.0], abs=1e-12)
    assert predictive(joint(spin_half_prep, meas)).max_deviation(bayes) <= 1e-12

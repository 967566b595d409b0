import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zilcrm.circular_core import ArcInterval, Cov2, DomainError
from zilcrm.fixture import astigmatism_fixture, fixture_censoring, load_bundled_fixture
from zilcrm.model import (
    CensoringSpec,
    Dataset,
    ModelVariant,
    PriorSpec,
    SubjectRecord,
    ValidationError,
    build_design_row,
    reconstruct_sigma_b,
    sigma_b_to_s1_tau,
    stage1_design,
    stage2_design,
    validate_dataset,
)

SPEC = CensoringSpec(ArcInterval.symmetric(0.035), ArcInterval.symmetric(0.035))


def small_dataset(theta_y=(0.5, 0.0, -1.0, 2.0), theta_x=(1.0, 0.0)):
    subjects = [
        SubjectRecord("a", [(theta_y[0], (1.0,)), (theta_y[1], (2.0,))], theta_x[0], (0.3,)),
        SubjectRecord("b", [(theta_y[2], (-1.0,)), (theta_y[3], (0.5,))], theta_x[1], (1.7,)),
    ]
    return Dataset.from_subjects(subjects, x_names=("age",), v_names=("pre",))


# -- design rows -------------------------------------------------------------

@pytest.mark.parametrize("x, theta, expected", [
    ((), 0.0, (1, 1, 0)),
    ((2.5,), math.pi / 2, (1, 2.5, 0, 1)),
    ((1, -1), math.pi, (1, 1, -1, -1, 0)),
])
def test_design_row_examples(x, theta, expected):
    np.testing.assert_allclose(build_design_row(x, theta), expected, atol=1e-15)


@given(st.lists(st.floats(-1e3, 1e3), max_size=8), st.floats(-math.pi, math.pi))
def test_design_row_shape(x, theta):
    row = build_design_row(x, theta)
    assert row.shape == (len(x) + 3,) and row[0] == 1.0


def test_stage_designs_match_rows():
    d = small_dataset()
    tx = np.array([0.7, -2.0])
    X = stage1_design(d, tx)
    for r in range(d.n_obs):
        np.testing.assert_allclose(X[r], build_design_row(d.x[r], tx[d.subject_index[r]]))
    V = stage2_design(d)
    np.testing.assert_allclose(V, [[1, 0.3], [1, 1.7]])


# -- random-effect parameterization ------------------------------------------

def test_reconstruct_identity():
    c = reconstruct_sigma_b(0.0, 1.0)
    assert (c.s11, c.s22, c.rho) == (1.0, 1.0, 0.0)


def test_reconstruct_example():
    c = reconstruct_sigma_b(0.5, 2.0)
    assert c.s11 == pytest.approx(2.0)
    assert c.s22 == pytest.approx(1.0)
    assert c.rho == pytest.approx(0.5 * math.sqrt(2.0))
    assert c.det == pytest.approx(1.0, abs=1e-12)


def test_reconstruct_determinant_many():
    rng = np.random.default_rng(0)
    s1 = rng.uniform(-5, 5, 10_000)
    tau = np.exp(rng.uniform(math.log(0.01), math.log(100), 10_000))
    dets = np.array([np.linalg.det(reconstruct_sigma_b(a, t).matrix) for a, t in zip(s1, tau)])
    assert np.max(np.abs(dets - 1.0)) < 1e-10


def test_reconstruct_rejects_nonpositive_tau():
    with pytest.raises(DomainError):
        reconstruct_sigma_b(0.1, 0.0)


@given(st.floats(0.05, 20), st.floats(-0.95, 0.95))
def test_unit_determinant_round_trip(s22, rho):
    s11 = 1.0 / (s22 * (1 - rho * rho))
    s1, tau = sigma_b_to_s1_tau(Cov2(s11, s22, rho))
    # definitional formulas
    assert s1 == pytest.approx(rho * math.sqrt(s22) / math.sqrt(s11), rel=1e-12, abs=1e-14)
    assert 1 / tau == pytest.approx(s22 * (1 - rho * rho), rel=1e-12)
    back = reconstruct_sigma_b(s1, tau)
    assert back.s11 == pytest.approx(s11, rel=1e-9)
    assert back.s22 == pytest.approx(s22, rel=1e-9)
    assert back.rho == pytest.approx(rho, abs=1e-9)


# -- dataset and validation --------------------------------------------------

def test_dataset_bookkeeping():
    d = small_dataset()
    assert (d.n, d.n_obs, d.p, d.q) == (2, 4, 1, 1)
    assert list(d.m) == [2, 2]
    assert d.zero_y.sum() == 1 and d.zero_x.sum() == 1
    recs = d.subjects()
    assert recs[0].subject_id == "a" and recs[1].theta_x == 0.0
    again = Dataset.from_subjects(recs, x_names=d.x_names, v_names=d.v_names)
    assert again.fingerprint() == d.fingerprint()


def test_fingerprint_changes_with_data():
    assert small_dataset().fingerprint() != small_dataset(theta_y=(0.5, 0.0, -1.0, 2.1)).fingerprint()


def test_clean_dataset_has_no_issues():
    rep = validate_dataset(small_dataset(), SPEC)
    assert rep.ok and rep.issues == []
    assert rep.zero_prop_y == 0.25 and rep.zero_prop_x == 0.5


def test_nonzero_angle_inside_arc_flagged():
    rep = validate_dataset(small_dataset(theta_y=(0.01, 0.0, -1.0, 2.0)), SPEC)
    assert not rep.ok
    assert len(rep.issues) == 1 and "theta_y=0.01" in rep.issues[0]


def test_out_of_range_angle_is_structural():
    with pytest.raises(ValidationError) as exc:
        validate_dataset(small_dataset(theta_y=(4.0, 0.0, -1.0, 2.0)), SPEC)
    assert any("theta_y" in msg for msg in exc.value.issues)


def test_subject_without_occasions_rejected():
    with pytest.raises(ValidationError):
        SubjectRecord("z", [], 0.3)


def test_fixture_zero_proportions():
    d = astigmatism_fixture()
    rep = validate_dataset(d, fixture_censoring())
    assert rep.issues == []
    assert round(100 * rep.zero_prop_y, 2) == 33.93
    assert (d.n, d.n_obs) == (56, 168)
    assert int(d.zero_x.sum()) == 20


def test_bundled_fixture_matches_generator():
    assert load_bundled_fixture().fingerprint() == astigmatism_fixture().fingerprint()


# -- specs ---------------------------------------------------------------------

def test_censoring_arcs_must_contain_zero():
    with pytest.raises(DomainError):
        CensoringSpec(ArcInterval(0.1, 0.2), ArcInterval.symmetric(0.1))


def test_prior_presets():
    p1 = PriorSpec.choice1(5, 3)
    p2 = PriorSpec.choice2(5, 3)
    np.testing.assert_allclose(p1.cov_beta1, 100 * np.eye(5))
    np.testing.assert_allclose(p2.cov_alpha2, 1000 * np.eye(3))
    assert p1.nu0 == 1.0 and p2.nu0 == 0.01


def test_prior_rejects_non_spd():
    p = PriorSpec.choice1(2, 2)
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(DomainError):
        PriorSpec(p.mu_beta1, p.mu_beta2, bad, p.cov_beta2, p.mu_alpha1, p.mu_alpha2,
                  p.cov_alpha1, p.cov_alpha2)


def test_model_variants():
    assert ModelVariant.from_name("model1") == ModelVariant(True, True, False)
    assert ModelVariant.from_name("model2") == ModelVariant(False, False, False)
    assert ModelVariant.from_name("model3") == ModelVariant(True, False, False)
    assert ModelVariant.model1(random_zeros=True).random_zeros
    with pytest.raises(ValueError):
        ModelVariant(True, False, True)

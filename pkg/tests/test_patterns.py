import numpy as np
import pytest

from tkgq import model, patterns
from tkgq.model import ModelParams
from tkgq.patterns import (
    check_asymmetric,
    check_composition,
    check_evolution,
    check_inverse,
    check_symmetric,
    verify_all,
)


ALL_CHECKS = [
    check_symmetric,
    check_asymmetric,
    check_inverse,
    check_composition,
    check_evolution,
]


@pytest.mark.parametrize("check", ALL_CHECKS)
def test_each_check_passes_at_default_scale(check):
    result = check(trials=300, dim=8, seed=5)
    assert result.identity_passed, result.row()
    assert result.control_passed, result.row()
    assert result.passed


@pytest.mark.parametrize("check", ALL_CHECKS)
@pytest.mark.parametrize("dim", [1, 8, 64])
def test_tolerances_hold_across_dimensions(check, dim):
    result = check(trials=100, dim=dim, seed=3)
    assert result.passed, result.row()


@pytest.mark.parametrize("check", ALL_CHECKS)
def test_deterministic_given_seed(check):
    a = check(trials=80, dim=4, seed=11)
    b = check(trials=80, dim=4, seed=11)
    assert a == b


def test_symmetric_identity_embeddings_score_dim():
    # all-identity entities and a real-only unit relation: both directions
    # score exactly d
    d = 6
    from tkgq.quat import QuaternionBatch

    entity = QuaternionBatch.identity((2, d))
    relation = QuaternionBatch.identity((1, d))
    rot = QuaternionBatch.identity((1, d))
    per = QuaternionBatch.zeros((1, d))
    params = ModelParams(entity, relation, rot, per, n_relations=1)
    fwd = model.score(params, np.array([[0, 0, 1, 0]])).scores[0]
    bwd = model.score(params, np.array([[1, 0, 0, 0]])).scores[0]
    assert fwd == bwd == float(d)


def test_asymmetric_sign_witness():
    # h = 1, t = i, w = i: phi(h,w,t) = (i)·(i) = 1 but phi(t,w,h) = (ii)·1 = -1
    from tkgq.quat import QuaternionBatch

    z = np.zeros((2, 1))
    entity = QuaternionBatch(np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]]),
                             z.copy(), z.copy())
    z1 = np.zeros((1, 1))
    relation = QuaternionBatch(z1.copy(), np.ones((1, 1)), z1.copy(), z1.copy())
    rot = QuaternionBatch.identity((1, 1))
    per = QuaternionBatch.zeros((1, 1))
    params = ModelParams(entity, relation, rot, per, n_relations=1)
    fwd = model.score(params, np.array([[0, 0, 1, 0]])).scores[0]
    bwd = model.score(params, np.array([[1, 0, 0, 0]])).scores[0]
    assert fwd == 1.0
    assert bwd == -1.0


def test_inverse_reduces_to_symmetric_for_real_relation():
    # a real-only composite is its own conjugate, so the inverse identity
    # becomes the symmetric one
    result = check_symmetric(trials=50, dim=4, seed=7)
    assert result.identity_passed


def test_composition_with_identity_relation():
    # r3 = 1 makes r1 = r2: chained and direct scores coincide trivially
    from tkgq.quat import QuaternionBatch

    rng = np.random.default_rng(13)
    d = 4
    entity = QuaternionBatch(*(rng.uniform(-1, 1, (2, d)) for _ in range(4)))
    r2 = QuaternionBatch(*(rng.uniform(-1, 1, (1, d)) for _ in range(4)))
    one = QuaternionBatch.identity((1, d))
    from tkgq import quat

    r1 = quat.hamilton_product(r2, one)
    for c2, c1 in zip(r2.components(), r1.components()):
        np.testing.assert_array_equal(c2, c1)


def test_evolution_same_timestamp_keeps_relation():
    # tau1 = tau2 means m = conj(v)⊗v = 1, hence r2 = r1
    from tkgq import quat
    from tkgq.quat import QuaternionBatch

    rng = np.random.default_rng(17)
    tau = QuaternionBatch(*(rng.uniform(-1, 1, (5, 3)) for _ in range(4)))
    v = quat.normalize(tau)
    m = quat.hamilton_product(quat.conjugate(v), v)
    r1 = QuaternionBatch(*(rng.uniform(-1, 1, (5, 3)) for _ in range(4)))
    r2 = quat.hamilton_product(quat.hamilton_product(m, r1), quat.conjugate(m))
    for c1, c2 in zip(r1.components(), r2.components()):
        np.testing.assert_allclose(c1, c2, atol=1e-14)


class TestNegativeControls:
    def test_symmetric_control_breaks(self):
        r = check_symmetric(trials=100, dim=8, seed=1)
        assert r.control_deviation > 1e-6

    def test_asymmetric_control_exact(self):
        r = check_asymmetric(trials=100, dim=8, seed=1)
        assert r.control_deviation == 0.0

    def test_inverse_control_breaks(self):
        r = check_inverse(trials=100, dim=8, seed=1)
        assert r.control_deviation > 1e-6

    def test_composition_control_breaks(self):
        r = check_composition(trials=100, dim=8, seed=1)
        assert r.control_deviation > 1e-6

    def test_evolution_control_breaks(self):
        r = check_evolution(trials=100, dim=8, seed=1)
        assert r.control_deviation > 1e-6


class TestReport:
    def test_verify_all_passes(self):
        report = verify_all(trials=200, dim=8, seed=0)
        assert report.all_passed
        assert len(report.checks) == 5
        names = [c.name for c in report.checks]
        assert names == ["symmetric", "asymmetric", "inverse", "composition", "evolution"]

    def test_table_renders_all_rows(self):
        report = verify_all(trials=50, dim=4, seed=2)
        text = report.table()
        for name in ("symmetric", "asymmetric", "inverse", "composition", "evolution"):
            assert name in text
        assert "pass" in text

    def test_report_deterministic(self):
        a = verify_all(trials=60, dim=4, seed=9)
        b = verify_all(trials=60, dim=4, seed=9)
        assert a == b

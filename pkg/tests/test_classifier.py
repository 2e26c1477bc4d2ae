"""Soft-margin linear classifier tests.

Optimality is checked by certificate: after training at a tight duality
gap, no small coordinate perturbation of the weights or bias may reduce
the regularized hinge objective by more than a rounding margin.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import sparse

from tarbench.classifier import (
    AUTO_C,
    ConvergenceError,
    LabeledExample,
    LinearModel,
    PRESUMPTIVE,
    SEED,
    SingleClassError,
    TrainingError,
    dump_model,
    hinge_objective,
    load_model,
    resolve_c,
    train,
    train_arrays,
    training_objective,
)
from tarbench.metrics import kendall_tau
from tarbench.vectors import EMPTY_VECTOR, SparseVector, rows_to_csr


def random_problem(rng: np.random.Generator, n_max=40, d_max=20):
    """A dense random training set with both labels present."""
    n = int(rng.integers(2, n_max + 1))
    d = int(rng.integers(1, d_max + 1))
    x = rng.normal(size=(n, d))
    y = rng.choice([-1.0, 1.0], size=n)
    y[0], y[1] = 1.0, -1.0
    return sparse.csr_matrix(x), y


def perturbation_improvements(matrix, y, c_value, model, step=1e-3):
    """Objective drops for every single-coordinate +-step perturbation."""
    base = hinge_objective(model.weights, model.bias, matrix, y, c_value)
    drops = []
    for k in range(model.n_features):
        for sign in (step, -step):
            w = model.weights.copy()
            w[k] += sign
            drops.append(base - hinge_objective(w, model.bias, matrix, y, c_value))
    for sign in (step, -step):
        drops.append(
            base - hinge_objective(model.weights, model.bias + sign, matrix, y, c_value)
        )
    return drops


class TestResolveC:
    def test_auto_is_inverse_mean_squared_norm(self):
        assert resolve_c(AUTO_C, 1.0) == 1.0
        assert resolve_c(AUTO_C, 4.0) == 0.25

    def test_auto_undefined_for_empty_vectors(self):
        with pytest.raises(TrainingError):
            resolve_c(AUTO_C, 0.0)

    def test_explicit_values(self):
        assert resolve_c(2.5, 123.0) == 2.5
        for bad in (0.0, -1.0, math.inf, math.nan, "huge"):
            with pytest.raises((TrainingError, ValueError)):
                resolve_c(bad, 1.0)


class TestLabeledExample:
    def test_label_validation(self):
        vec = SparseVector((0,), (1.0,))
        with pytest.raises(ValueError):
            LabeledExample(vec, 0)
        with pytest.raises(ValueError):
            LabeledExample(vec, 2)

    def test_presumptive_must_be_negative(self):
        vec = SparseVector((0,), (1.0,))
        LabeledExample(vec, -1, provenance=PRESUMPTIVE)
        with pytest.raises(ValueError):
            LabeledExample(vec, 1, provenance=PRESUMPTIVE)

    def test_seed_provenance_allows_positive(self):
        LabeledExample(SparseVector((0,), (1.0,)), 1, provenance=SEED)

    def test_unknown_provenance(self):
        with pytest.raises(ValueError):
            LabeledExample(SparseVector((0,), (1.0,)), 1, provenance="guess")


class TestTwoPointProblem:
    def test_opposed_unit_points(self):
        # One positive at x=+1, one negative at x=-1. The optimum of
        # 0.5 w^2 + C sum hinge with C=1 is w=1, b=0, objective 0.5.
        examples = [
            LabeledExample(SparseVector((0,), (1.0,)), 1),
            LabeledExample(SparseVector((0,), (-1.0,)), -1),
        ]
        model = train(examples, n_features=1)
        assert model.weights[0] == pytest.approx(1.0, abs=1e-3)
        assert model.bias == pytest.approx(0.0, abs=1e-3)
        assert training_objective(model, examples, c=1.0) == pytest.approx(
            0.5, abs=1e-3
        )

    def test_auto_c_on_unit_vectors_is_one(self):
        examples = [
            LabeledExample(SparseVector((0,), (1.0,)), 1),
            LabeledExample(SparseVector((1,), (1.0,)), -1),
        ]
        matrix = rows_to_csr([e.vector for e in examples], 2)
        sq = matrix.copy()
        sq.data **= 2
        assert resolve_c(AUTO_C, float(sq.sum(axis=1).mean())) == 1.0


class TestTrainValidation:
    def test_single_class_rejected(self):
        examples = [
            LabeledExample(SparseVector((0,), (1.0,)), 1),
            LabeledExample(SparseVector((1,), (1.0,)), 1),
        ]
        with pytest.raises(SingleClassError):
            train(examples, n_features=2)

    def test_empty_training_set_rejected(self):
        with pytest.raises(TrainingError):
            train([], n_features=1)

    def test_label_vector_shape_and_values(self):
        matrix = sparse.csr_matrix(np.eye(2))
        with pytest.raises(TrainingError):
            train_arrays(matrix, np.asarray([1.0, -1.0, 1.0]))
        with pytest.raises(TrainingError):
            train_arrays(matrix, np.asarray([1.0, 0.5]))

    def test_max_steps_exhaustion_raises(self):
        rng = np.random.default_rng(7)
        matrix, y = random_problem(rng)
        with pytest.raises(ConvergenceError):
            train_arrays(matrix, y, tol=1e-12, max_steps=1)


class TestOptimalityCertificate:
    def test_no_small_perturbation_improves(self):
        # Ten frozen random problems, trained to a tight gap. Any 1e-3
        # single-coordinate move must fail to improve the objective by
        # more than 1e-6.
        rng = np.random.default_rng(20260501)
        for _ in range(10):
            matrix, y = random_problem(rng)
            sq = matrix.copy()
            sq.data **= 2
            c_value = resolve_c(AUTO_C, float(sq.sum(axis=1).mean()))
            model = train_arrays(matrix, y, tol=1e-8)
            drops = perturbation_improvements(matrix, y, c_value, model)
            assert max(drops) <= 1e-6

    def test_default_tolerance_gap_contract(self):
        rng = np.random.default_rng(99)
        for _ in range(5):
            matrix, y = random_problem(rng)
            model = train_arrays(matrix, y)
            assert model.converged_gap <= 1e-3

    def test_separable_set_trains_clean(self):
        rng = np.random.default_rng(3)
        pos = rng.normal(loc=+3.0, scale=0.3, size=(15, 4))
        neg = rng.normal(loc=-3.0, scale=0.3, size=(15, 4))
        matrix = sparse.csr_matrix(np.vstack([pos, neg]))
        y = np.asarray([1.0] * 15 + [-1.0] * 15)
        model = train_arrays(matrix, y, tol=1e-8)
        scores = model.score_matrix(matrix)
        assert np.all(np.sign(scores) == y)


class TestInvariances:
    def test_bitwise_deterministic(self):
        rng = np.random.default_rng(11)
        matrix, y = random_problem(rng)
        a = train_arrays(matrix, y)
        b = train_arrays(matrix, y)
        assert np.array_equal(a.weights, b.weights)
        assert a.bias == b.bias
        assert a.dual_steps == b.dual_steps

    def test_scaling_with_auto_c_preserves_ranking(self):
        rng = np.random.default_rng(5)
        matrix, y = random_problem(rng, n_max=30, d_max=10)
        probe = sparse.csr_matrix(rng.normal(size=(50, matrix.shape[1])))
        plain = train_arrays(matrix, y, tol=1e-8)
        scaled = train_arrays(matrix.multiply(10.0).tocsr(), y, tol=1e-8)
        s_plain = plain.score_matrix(probe)
        s_scaled = scaled.score_matrix(probe.multiply(10.0).tocsr())
        # Scores agree up to solver tolerance; the ranking must be exact.
        assert np.allclose(s_plain, s_scaled, atol=1e-4)
        assert kendall_tau(
            list(np.argsort(-s_plain)), list(np.argsort(-s_scaled))
        ) == pytest.approx(1.0)

    def test_example_order_barely_matters(self):
        rng = np.random.default_rng(17)
        x = rng.normal(size=(30, 8))
        y = rng.choice([-1.0, 1.0], size=30)
        y[0], y[1] = 1.0, -1.0
        perm = rng.permutation(30)
        probe = sparse.csr_matrix(rng.normal(size=(50, 8)))
        a = train_arrays(sparse.csr_matrix(x), y)
        b = train_arrays(sparse.csr_matrix(x[perm]), y[perm])
        rank_a = list(np.argsort(-a.score_matrix(probe), kind="stable"))
        rank_b = list(np.argsort(-b.score_matrix(probe), kind="stable"))
        assert kendall_tau(rank_a, rank_b) >= 0.99


class TestModelSurface:
    def test_score_matches_dense_dot(self):
        model = LinearModel(weights=np.asarray([0.5, -2.0, 0.0]), bias=0.25)
        vec = SparseVector((0, 2), (2.0, 10.0))
        assert model.score(vec) == pytest.approx(0.5 * 2.0 + 0.25)
        assert model.score(EMPTY_VECTOR) == 0.25

    def test_score_matrix_matches_score(self):
        rng = np.random.default_rng(23)
        model = LinearModel(weights=rng.normal(size=6), bias=-0.3)
        rows = []
        for _ in range(8):
            fids = sorted(rng.choice(6, size=3, replace=False))
            rows.append(
                SparseVector(tuple(int(f) for f in fids), tuple(rng.normal(size=3)))
            )
        matrix = rows_to_csr(rows, 6)
        batch = model.score_matrix(matrix)
        for row, vec in enumerate(rows):
            assert batch[row] == pytest.approx(model.score(vec), abs=1e-12)

    def test_hinge_objective_hand_value(self):
        # w=[1,0], b=0, C=2; margins: +1 doc at x=(0.5,0) -> 0.5 hinge,
        # -1 doc at x=(-2,0) -> margin 2, no hinge.
        matrix = sparse.csr_matrix(np.asarray([[0.5, 0.0], [-2.0, 0.0]]))
        y = np.asarray([1.0, -1.0])
        w = np.asarray([1.0, 0.0])
        assert hinge_objective(w, 0.0, matrix, y, 2.0) == pytest.approx(
            0.5 * 1.0 + 2.0 * 0.5
        )

    def test_dump_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(31)
        matrix, y = random_problem(rng)
        model = train_arrays(matrix, y)
        path = tmp_path / "model.txt"
        dump_model(model, path, digits=17)
        loaded = load_model(path, model.n_features)
        assert np.allclose(loaded.weights, model.weights, rtol=0, atol=0)
        assert loaded.bias == model.bias

    def test_load_skips_blank_lines(self, tmp_path):
        path = tmp_path / "model.txt"
        path.write_text("bias 0.5\n\n2 1.25\n", encoding="utf-8")
        model = load_model(path, 4)
        assert model.bias == 0.5
        assert list(model.weights) == [0.0, 0.0, 1.25, 0.0]

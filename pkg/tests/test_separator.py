import numpy as np
import pytest

import dualmp.autodiff as ad
from dualmp.autodiff import tensor
from dualmp.separator import (
    edge_label_signs,
    edge_score_values,
    edge_scores,
    heterophily_loss,
    project_features,
)


class TestProjectFeatures:
    def test_identity_on_nonnegative(self):
        x = tensor([[1.0, 2.0], [0.0, 3.0]])
        h = project_features(x, tensor(np.eye(2)), tensor(np.zeros((1, 2))))
        assert np.array_equal(h.data, x.data)

    def test_zero_input_passes_relu_bias(self):
        h = project_features(tensor(np.zeros((2, 2))), tensor(np.eye(2)), tensor([[-1.0, 2.0]]))
        assert np.array_equal(h.data, [[0.0, 2.0], [0.0, 2.0]])

    def test_hand_value(self):
        h = project_features(tensor([[1.0, -1.0]]), tensor(np.eye(2)), tensor(np.zeros((1, 2))))
        assert h.data.tolist() == [[1.0, 0.0]]

    def test_dropout_only_in_training(self):
        rng = np.random.default_rng(0)
        x = tensor(np.ones((50, 20)))
        w, b = tensor(np.eye(20)), tensor(np.zeros((1, 20)))
        eval_h = project_features(x, w, b, dropout_rate=0.5, training=False)
        train_h = project_features(x, w, b, dropout_rate=0.5, training=True, rng=rng)
        assert (eval_h.data == 1.0).all()
        assert (train_h.data == 0.0).any()


class TestEdgeScores:
    def test_difference_only_weight_gives_zero_on_equal_embeddings(self):
        h = tensor([[1.0, 2.0], [1.0, 2.0]])
        w = tensor(np.array([[0.0], [0.0], [0.0], [0.0], [1.0], [1.0]]))
        scores = edge_scores(h, [0], [1], w)
        assert scores.data.tolist() == [[0.0]]

    def test_zero_weight_gives_zero(self):
        h = tensor(np.random.default_rng(1).normal(size=(4, 3)))
        scores = edge_scores(h, [0, 1, 2], [1, 2, 3], tensor(np.zeros((9, 1))))
        assert not scores.data.any()

    def test_hand_value(self):
        h = tensor([[1.0], [0.0]])
        w = tensor(np.array([[0.0], [0.0], [1.0]]))
        scores = edge_scores(h, [0], [1], w)
        assert scores.data[0, 0] == pytest.approx(np.tanh(1.0))

    def test_batched_matches_plain_twin(self):
        rng = np.random.default_rng(2)
        h = rng.normal(size=(10, 4))
        w = rng.normal(size=(12, 1))
        src = rng.integers(0, 10, size=15)
        tgt = rng.integers(0, 10, size=15)
        taped = edge_scores(tensor(h), src, tgt, tensor(w)).data.reshape(-1)
        plain = edge_score_values(h, src, tgt, w)
        assert np.array_equal(taped, plain)

    def test_strictly_inside_unit_interval(self):
        # holds up to float64 resolution; tanh rounds to exactly 1 past |x| ~ 19
        rng = np.random.default_rng(3)
        h = tensor(rng.normal(size=(20, 4)))
        w = tensor(rng.normal(size=(12, 1)))
        scores = edge_scores(h, rng.integers(0, 20, 50), rng.integers(0, 20, 50), w).data
        assert (np.abs(scores) < 1.0).all()

    def test_difference_block_antisymmetry(self):
        # with weight only on the difference block, swapping endpoints negates the score
        rng = np.random.default_rng(4)
        h = tensor(rng.normal(size=(6, 3)))
        w = np.zeros((9, 1))
        w[6:] = rng.normal(size=(3, 1))
        forward = edge_scores(h, [0, 2], [1, 5], tensor(w)).data
        backward_ = edge_scores(h, [1, 5], [0, 2], tensor(w)).data
        assert np.allclose(forward, -backward_)


class TestHeterophilyLoss:
    def test_perfect_scores_zero_loss(self):
        scores = tensor(np.array([[1.0], [-1.0]]))
        assert heterophily_loss(scores, [1.0, -1.0]).item() == 0.0

    def test_zero_scores_unit_loss(self):
        scores = tensor(np.zeros((4, 1)))
        assert heterophily_loss(scores, [1.0, -1.0, 1.0, -1.0]).item() == 1.0

    def test_hand_value(self):
        assert heterophily_loss(tensor([[0.5]]), [-1.0]).item() == pytest.approx(1.5)

    def test_empty_batch_warns_and_returns_zero(self):
        with pytest.warns(UserWarning, match="empty edge batch"):
            loss = heterophily_loss(tensor(np.zeros((0, 1))), [])
        assert loss.item() == 0.0

    def test_strictly_positive_on_tanh_scores(self):
        # |score| < 1 through tanh, so the hinge can never reach zero
        rng = np.random.default_rng(5)
        h = tensor(rng.normal(size=(10, 3)) * 5)
        w = tensor(rng.normal(size=(9, 1)) * 5)
        scores = edge_scores(h, rng.integers(0, 10, 30), rng.integers(0, 10, 30), w)
        signs = rng.choice([-1.0, 1.0], size=30)
        assert heterophily_loss(scores, signs).item() > 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="scores for"):
            heterophily_loss(tensor(np.zeros((2, 1))), [1.0])


class TestEdgeLabelSigns:
    def test_same_and_different_labels(self):
        labels = np.array([0, 0, 1, 1])
        mask = np.ones(4, dtype=bool)
        pos, signs = edge_label_signs([0, 0, 2], [1, 2, 3], labels, mask)
        assert pos.tolist() == [0, 1, 2]
        assert signs.tolist() == [-1.0, 1.0, -1.0]  # 0-0 same, 0-1 differ, 1-1 same

    def test_excludes_edges_leaving_train_split(self):
        labels = np.array([0, 1, 0])
        mask = np.array([True, True, False])
        pos, signs = edge_label_signs([0, 0], [1, 2], labels, mask)
        assert pos.tolist() == [0]
        assert signs.tolist() == [1.0]

    def test_never_reads_labels_outside_train(self):
        # poison the non-train labels; the output must not change
        mask = np.array([True, True, False, False])
        clean = np.array([0, 1, 0, 1])
        poisoned = np.array([0, 1, 99, -7])
        sources, targets = [0, 1, 2, 0], [1, 0, 3, 3]
        pos_a, signs_a = edge_label_signs(sources, targets, clean, mask)
        pos_b, signs_b = edge_label_signs(sources, targets, poisoned, mask)
        assert pos_a.tolist() == pos_b.tolist()
        assert signs_a.tolist() == signs_b.tolist()


def test_hinge_gradient_reaches_projection():
    rng = np.random.default_rng(6)
    store = ad.ParamStore()
    proj_w = store.add("proj_w", rng.normal(size=(4, 3)))
    proj_b = store.add("proj_b", np.zeros((1, 3)))
    edge_w = store.add("edge_w", rng.normal(size=(9, 1)))
    x = tensor(rng.normal(size=(8, 4)))
    src = rng.integers(0, 8, size=10)
    tgt = rng.integers(0, 8, size=10)
    signs = rng.choice([-1.0, 1.0], size=10)

    def forward():
        h = project_features(x, proj_w, proj_b)
        return heterophily_loss(edge_scores(h, src, tgt, edge_w), signs)

    errors = ad.grad_check(forward, store)
    assert max(errors.values()) < 1e-6

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cel.consolidation import (
    ConsolidationBank,
    ConsolidationRecord,
    compute_fim_diagonal,
    consolidate,
    ewc_penalty,
    ewc_penalty_gradient,
    fim_rows,
    regularized_loss,
)
from cel.nn_core import ParameterSet, finite_difference_gradient
from conftest import random_batch, random_model


def bank_with(anchor, fisher, context_id=0):
    return ConsolidationBank([ConsolidationRecord(context_id, fisher, anchor)])


def random_bank(rng, H, D, n_records):
    records = []
    for cid in range(n_records):
        anchor = random_model(rng, H, D)
        fisher = ParameterSet(H, D, rng.exponential(1.0, anchor.size))
        records.append(ConsolidationRecord(cid, fisher, anchor))
    return ConsolidationBank(records)


# the penalty is exactly quadratic, so a wide step has no truncation error and less cancellation
def penalty_fd(params, bank, lam, step=1e-3):
    probe = params.copy()
    out = np.zeros(params.size)
    for k in range(params.size):
        orig = probe.data[k]
        probe.data[k] = orig + step
        up = ewc_penalty(probe, bank, lam)
        probe.data[k] = orig - step
        down = ewc_penalty(probe, bank, lam)
        probe.data[k] = orig
        out[k] = (up - down) / (2 * step)
    return out


# -- Fisher -----------------------------------------------------------------


def test_fisher_is_zero_for_zero_model_on_zero_targets():
    p = ParameterSet(3, 2)
    X = np.zeros((5, 2, 2))
    fisher = compute_fim_diagonal(p, (X, np.zeros(5)))
    assert np.all(fisher.data == 0.0)


@given(st.integers(0, 5000))
def test_fisher_nonnegative_and_order_invariant(seed):
    rng = np.random.default_rng(seed)
    p = random_model(rng, 2, 2)
    X, y = random_batch(rng, 6, 2, 2)
    f1 = compute_fim_diagonal(p, (X, y))
    perm = rng.permutation(6)
    f2 = compute_fim_diagonal(p, (X[perm], y[perm]))
    assert np.all(f1.data >= 0)
    assert np.allclose(f1.data, f2.data, rtol=1e-12, atol=1e-15)


def test_single_sample_fisher_is_squared_fd_gradient(rng):
    p = random_model(rng, 1, 1)
    X, y = random_batch(rng, 1, 2, 1)
    fd = finite_difference_gradient(p, (X, y), 1e-5)
    fisher = compute_fim_diagonal(p, (X, y))
    assert np.allclose(fisher.data, fd.data**2, rtol=0, atol=1e-8)


def test_fisher_uses_per_sample_gradients(rng):
    # squares of per-sample gradients, not the square of the batch-mean gradient
    p = random_model(rng, 2, 2)
    X, y = random_batch(rng, 4, 1, 2)
    expected = np.mean(
        [finite_difference_gradient(p, (X[k : k + 1], y[k : k + 1]), 1e-5).data ** 2 for k in range(4)], axis=0
    )
    assert np.allclose(compute_fim_diagonal(p, (X, y)).data, expected, rtol=1e-6, atol=1e-10)


def test_fisher_leaves_params_untouched(rng):
    p = random_model(rng, 2, 2)
    before = p.data.copy()
    compute_fim_diagonal(p, random_batch(rng, 3, 1, 2))
    assert np.array_equal(p.data, before)


# -- penalty ----------------------------------------------------------------


def test_penalty_hand_case():
    p = ParameterSet(1, 1)
    anchor, fisher = ParameterSet(1, 1), ParameterSet(1, 1)
    fisher.data[5] = 2.0
    p.data[5] = 3.0
    bank = bank_with(anchor, fisher)
    assert ewc_penalty(p, bank, 1000.0) == 9000.0
    grad = ewc_penalty_gradient(p, bank, 1000.0)
    assert grad.data[5] == 6000.0
    assert np.count_nonzero(grad.data) == 1


def test_penalty_zero_at_anchor_and_for_empty_bank(rng):
    bank = random_bank(rng, 2, 2, 1)
    anchor = bank.records[0].anchor.copy()
    assert ewc_penalty(anchor, bank, 1000.0) == 0.0
    assert np.all(ewc_penalty_gradient(anchor, bank, 1000.0).data == 0.0)
    assert ewc_penalty(random_model(rng, 2, 2), ConsolidationBank(), 1000.0) == 0.0


@given(st.integers(0, 5000), st.integers(1, 3))
def test_penalty_quadruples_when_displacement_doubles(seed, n_records):
    rng = np.random.default_rng(seed)
    anchor = random_model(rng, 2, 2)
    fisher = ParameterSet(2, 2, rng.exponential(1.0, anchor.size))
    records = [ConsolidationRecord(k, fisher.copy(), anchor.copy()) for k in range(n_records)]
    bank = ConsolidationBank(records)
    delta = rng.normal(size=anchor.size)
    one = ParameterSet(2, 2, anchor.data + delta)
    two = ParameterSet(2, 2, anchor.data + 2 * delta)
    assert ewc_penalty(two, bank, 1000.0) == pytest.approx(4 * ewc_penalty(one, bank, 1000.0), rel=1e-12)


@given(st.integers(0, 5000), st.floats(0.0, 1e4), st.floats(1e-3, 1e4))
def test_penalty_strictly_increasing_in_lambda(seed, lam, bump):
    rng = np.random.default_rng(seed)
    bank = random_bank(rng, 2, 2, 2)
    p = random_model(rng, 2, 2)
    assert ewc_penalty(p, bank, lam + bump) > ewc_penalty(p, bank, lam)


def test_penalty_zero_iff_positive_fisher_coords_at_anchor(rng):
    anchor = random_model(rng, 2, 2)
    fisher = ParameterSet(2, 2, rng.exponential(1.0, anchor.size))
    fisher.data[:10] = 0.0
    bank = bank_with(anchor, fisher)
    moved = anchor.copy()
    moved.data[:10] += 1.0  # only zero-Fisher coordinates
    assert ewc_penalty(moved, bank, 1000.0) == 0.0
    moved.data[10] += 1e-3
    assert ewc_penalty(moved, bank, 1000.0) > 0.0


@given(st.integers(0, 5000))
def test_penalty_gradient_matches_fd(seed):
    rng = np.random.default_rng(seed)
    bank = random_bank(rng, 2, 1, 3)
    p = random_model(rng, 2, 1)
    analytic = ewc_penalty_gradient(p, bank, 1000.0).data
    fd = penalty_fd(p, bank, 1000.0)
    assert np.max(np.abs(analytic - fd) / np.maximum(np.abs(analytic), 1e-2)) < 1e-6


def test_penalty_rejects_shape_mismatch(rng):
    bank = random_bank(rng, 2, 2, 1)
    with pytest.raises(ValueError, match="context 0"):
        ewc_penalty(random_model(rng, 3, 2), bank, 1.0)
    with pytest.raises(ValueError):
        ewc_penalty_gradient(random_model(rng, 2, 3), bank, 1.0)


@pytest.mark.parametrize("mse, penalty, total", [(0.5, 0.0, 0.5), (0.0, 9000.0, 9000.0), (0.25, 0.75, 1.0)])
def test_regularized_loss(mse, penalty, total):
    assert regularized_loss(mse, penalty) == total


# -- bank -------------------------------------------------------------------


def test_consolidate_appends_deep_copy(rng):
    bank = ConsolidationBank()
    p = random_model(rng, 2, 2)
    batch = random_batch(rng, 3, 1, 2)
    consolidate(bank, 0, p, batch)
    assert len(bank) == 1
    snapshot = bank.records[0].anchor.data.copy()
    p.data += 1.0
    assert np.array_equal(bank.records[0].anchor.data, snapshot)
    with pytest.raises(ValueError):
        bank.records[0].anchor.data[0] = 0.0  # read-only


def test_consolidate_rejects_out_of_order(rng):
    bank = ConsolidationBank()
    p = random_model(rng, 2, 2)
    batch = random_batch(rng, 3, 1, 2)
    consolidate(bank, 1, p, batch)
    with pytest.raises(ValueError):
        consolidate(bank, 1, p, batch)
    with pytest.raises(ValueError):
        consolidate(bank, 0, p, batch)


def test_penalty_reads_every_record(rng):
    bank = random_bank(rng, 2, 2, 4)
    p = random_model(rng, 2, 2)
    per_record = [ewc_penalty(p, ConsolidationBank([r]), 10.0) for r in bank]
    assert len(bank) == 4
    assert ewc_penalty(p, bank, 10.0) == pytest.approx(sum(per_record), rel=1e-13)


def test_fim_rows_cover_all_parameters(rng):
    bank = random_bank(rng, 2, 3, 2)
    rows = list(fim_rows(bank))
    assert len(rows) == 2 * bank.records[0].anchor.size
    assert {r[1] for r in rows} == {
        "lstm.weight_ih_l0", "lstm.weight_hh_l0", "lstm.bias_ih_l0", "lstm.bias_hh_l0", "linear.weight", "linear.bias"
    }

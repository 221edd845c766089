import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from emgan import tensor as T
from emgan.errors import GraphCycle, NonScalarLoss, ShapeMismatch
from emgan.tensor import ParamSet, Tensor


def leaf(a):
    return Tensor(np.asarray(a, dtype=float), requires_grad=True)


def test_backward_requires_scalar():
    x = leaf(np.ones(3))
    with pytest.raises(NonScalarLoss):
        (x * 2.0).backward()


def test_gradients_accumulate_across_backward_calls():
    x = leaf([1.0, 2.0])
    T.tsum(x * x).backward()
    T.tsum(x * x).backward()
    np.testing.assert_array_equal(x.grad, [4.0, 8.0])


def test_shared_subexpression_gets_summed_gradient():
    x = leaf(3.0)
    y = x * x
    (y + y).backward()
    assert x.grad == pytest.approx(12.0)


def test_intermediates_do_not_keep_grad_unless_retained():
    x = leaf([1.0, -2.0])
    h = x * 3.0
    r = T.relu(x).retain_grad()
    T.tsum(h + r).backward()
    assert h.grad is None
    np.testing.assert_array_equal(r.grad, [1.0, 1.0])


def test_cycle_detected():
    a = leaf(1.0)
    b = a * 2.0
    c = b * 2.0
    b._parents = (c,)
    with pytest.raises(GraphCycle):
        c.backward()


def test_broadcast_gradients_are_reduced():
    a = leaf(np.ones((2, 3)))
    b = leaf(np.ones(3))
    T.tsum(a * b).backward()
    assert b.grad.shape == (3,)
    np.testing.assert_array_equal(b.grad, [2.0, 2.0, 2.0])


def test_advanced_index_scatter_adds_repeats():
    x = leaf(np.arange(4.0))
    T.tsum(T.getitem(x, (np.array([1, 1, 3]),))).backward()
    np.testing.assert_array_equal(x.grad, [0, 2, 0, 1])


def test_abs_subgradient_zero_at_tie():
    x = leaf([0.0, -1.0, 2.0])
    T.tsum(T.tabs(x)).backward()
    np.testing.assert_array_equal(x.grad, [0.0, -1.0, 1.0])


def test_sigmoid_and_softplus_stable_at_extremes():
    x = Tensor(np.array([-800.0, 0.0, 800.0]))
    s = T.sigmoid(x).data
    assert np.all(np.isfinite(s)) and s[0] == 0.0 and s[1] == 0.5 and s[2] == 1.0
    sp = T.softplus(x).data
    assert np.all(np.isfinite(sp)) and sp[2] == 800.0


def test_dropout_inverted_scaling_and_eval_identity():
    x = Tensor(np.ones(10000))
    y = T.dropout(x, 0.5, np.random.default_rng(0), training=True).data
    assert set(np.unique(y)) <= {0.0, 2.0}
    assert abs(y.mean() - 1.0) < 0.05
    assert T.dropout(x, 0.5, None, training=False) is x


def test_dense_shapes():
    with pytest.raises(ShapeMismatch):
        T.dense(Tensor(np.ones(3)), Tensor(np.ones((2, 4))), Tensor(np.ones(2)))


def test_paramset_rejects_duplicates_and_detaches():
    ps = ParamSet({"a": np.ones(2)})
    with pytest.raises(KeyError):
        ps.add("a", np.zeros(2))
    d = ps.detached()
    assert not d["a"].requires_grad and ps["a"].requires_grad
    assert d.equal(ps) and ps.n_params() == 2


def test_non_tracking_ops_build_no_graph():
    y = Tensor(np.ones(3)) * 2.0
    assert y._parents == () and not y.requires_grad


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(1, 6), elements=st.floats(-5, 5)))
def test_sum_of_mul_gradient_property(a):
    x = leaf(a)
    T.tsum(T.mul(x, x)).backward()
    np.testing.assert_allclose(x.grad, 2 * a)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=2, max_size=3), st.integers(0, 2**31 - 1))
def test_concat_then_split_gradient_roundtrip(sizes, seed):
    rng = np.random.default_rng(seed)
    parts = [leaf(rng.standard_normal(n)) for n in sizes]
    w = rng.standard_normal(sum(sizes))
    T.tsum(T.mul(T.concat(parts), Tensor(w))).backward()
    np.testing.assert_array_equal(np.concatenate([p.grad for p in parts]), w)

import numpy as np
import pytest

from bandana.tensor import (BatchNormState, SparseMatrix, Tape, Tensor, add,
                            add_bias, affine, backward, batchnorm, clip,
                            dropout, elu, gather_rows, grouped_softmax, log,
                            matmul, mean_all, mul_const, multiply, sigmoid,
                            softmax_cross_entropy, spmm, sum_all)

RNG = np.random.default_rng(20240202)


def finite_diff_check(make_inputs, forward, n_trials: int, eps: float = 1e-5,
                      rtol: float = 1e-4):
    """Central finite differences against the tape gradient.

    ``make_inputs`` returns a list of Tensors (requires_grad already set);
    ``forward`` maps them to a scalar Tensor.
    """
    for trial in range(n_trials):
        inputs = make_inputs(trial)
        with Tape() as tape:
            loss = forward(*inputs)
        backward(tape, loss)
        for t in inputs:
            if not t.requires_grad:
                continue
            assert t.grad is not None, "missing gradient"
            fd = np.zeros_like(t.data)
            flat = t.data.reshape(-1)
            for pos in range(flat.size):
                orig = flat[pos]
                flat[pos] = orig + eps
                up = forward(*inputs).item()
                flat[pos] = orig - eps
                down = forward(*inputs).item()
                flat[pos] = orig
                fd.reshape(-1)[pos] = (up - down) / (2 * eps)
            scale = np.maximum(np.abs(fd), 1e-3)
            assert np.max(np.abs(fd - t.grad) / scale) < rtol


def _rand_tensor(shape, grad=True):
    return Tensor(RNG.normal(size=shape), requires_grad=grad)


# -- forward semantics -------------------------------------------------------

def test_spmm_identity():
    s = SparseMatrix.identity(4)
    x = Tensor(RNG.normal(size=(4, 3)))
    assert np.array_equal(spmm(s, x).data, x.data)


def test_spmm_hand_example():
    # [[0, 2], [0, 0]] @ [[1], [3]] = [[6], [0]]
    s = SparseMatrix((2, 2), np.array([0, 1, 1]), np.array([1]), np.array([2.0]))
    x = Tensor(np.array([[1.0], [3.0]]))
    assert np.array_equal(spmm(s, x).data, [[6.0], [0.0]])


def test_spmm_zero_values():
    s = SparseMatrix((2, 2), np.array([0, 1, 2]), np.array([1, 0]), np.zeros(2))
    x = Tensor(np.ones((2, 2)))
    assert np.all(spmm(s, x).data == 0)


def test_spmm_matches_dense_oracle():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        dense = rng.normal(size=(10, 10)) * (rng.random((10, 10)) < 0.3)
        indptr = np.zeros(11, dtype=np.int64)
        cols, vals = [], []
        for i in range(10):
            nz = np.flatnonzero(dense[i])
            cols.extend(nz.tolist())
            vals.extend(dense[i, nz].tolist())
            indptr[i + 1] = len(cols)
        s = SparseMatrix((10, 10), indptr, np.array(cols, dtype=np.int64), np.array(vals))
        x = rng.normal(size=(10, 6))
        assert np.allclose(spmm(s, Tensor(x)).data, dense @ x, atol=1e-12)


def test_spmm_shape_mismatch():
    with pytest.raises(ValueError):
        spmm(SparseMatrix.identity(3), Tensor(np.ones((4, 2))))


def test_forward_op_values():
    assert sigmoid(Tensor([[0.0]])).item() == 0.5
    assert abs(elu(Tensor([[-1.0]])).item() - (np.exp(-1) - 1)) < 1e-12
    assert np.allclose(log(Tensor([[np.e]])).data, 1.0)
    x = _rand_tensor((3, 3), grad=False)
    assert dropout(x, 0.0, None, train_mode=True) is x
    assert dropout(x, 0.5, None, train_mode=False) is x


def test_dropout_scales_survivors():
    x = Tensor(np.ones((200, 50)))
    out = dropout(x, 0.25, np.random.default_rng(0), train_mode=True)
    vals = np.unique(out.data)
    assert set(np.round(vals, 12).tolist()) <= {0.0, np.round(1 / 0.75, 12)}
    assert abs(out.data.mean() - 1.0) < 0.02


def test_batchnorm_train_normalizes_and_tracks():
    x = Tensor(RNG.normal(loc=3.0, scale=2.0, size=(500, 4)))
    gamma, beta = Tensor(np.ones((1, 4))), Tensor(np.zeros((1, 4)))
    state = BatchNormState(4)
    out = batchnorm(x, gamma, beta, state, train_mode=True)
    assert np.allclose(out.data.mean(axis=0), 0.0, atol=1e-10)
    assert np.allclose(out.data.std(axis=0), 1.0, atol=1e-3)
    assert np.allclose(state.running_mean, 0.1 * x.data.mean(axis=0), atol=1e-12)


def test_batchnorm_eval_uses_running_stats():
    x = Tensor(RNG.normal(size=(50, 3)))
    gamma, beta = Tensor(np.full((1, 3), 2.0)), Tensor(np.ones((1, 3)))
    state = BatchNormState(3)
    state.running_mean = np.array([1.0, 2.0, 3.0])
    state.running_var = np.array([4.0, 4.0, 4.0])
    out = batchnorm(x, gamma, beta, state, train_mode=False)
    expected = 2.0 * (x.data - state.running_mean) / np.sqrt(4.0 + 1e-5) + 1.0
    assert np.allclose(out.data, expected, atol=1e-12)
    assert np.array_equal(state.running_mean, [1.0, 2.0, 3.0])  # unchanged in eval


def test_backward_requires_scalar():
    x = _rand_tensor((2, 2))
    with Tape() as tape:
        y = elu(x)
    with pytest.raises(ValueError):
        backward(tape, y)


def test_gradient_accumulates_over_reuse():
    x = Tensor(np.array([[2.0]]), requires_grad=True)
    with Tape() as tape:
        y = sum_all(multiply(x, x))  # d/dx x^2 = 2x
    backward(tape, y)
    assert np.allclose(x.grad, [[4.0]])


def test_zero_multiplier_kills_gradient():
    w = Tensor(np.array([[0.3]]), requires_grad=True)
    with Tape() as tape:
        loss = sum_all(mul_const(sigmoid(w), 0.0))
    backward(tape, loss)
    assert np.allclose(w.grad, [[0.0]])


def test_matmul_sum_gradient_structure():
    # loss = sum(W @ x) with x fixed: dL/dW = row of x sums broadcast
    w = _rand_tensor((2, 2))
    x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
    with Tape() as tape:
        loss = sum_all(matmul(w, x))
    backward(tape, loss)
    expected = np.array([[3.0, 7.0], [3.0, 7.0]])  # ones @ x.T
    assert np.allclose(w.grad, expected)


# -- finite-difference gradient oracle, 100 random instances per primitive ---

N_FD = 100


def test_grad_matmul():
    def make(t):
        rng = np.random.default_rng(t)
        m, k, n = rng.integers(1, 8, 3)
        return [Tensor(rng.normal(size=(m, k)), True), Tensor(rng.normal(size=(k, n)), True)]
    finite_diff_check(make, lambda a, b: mean_all(matmul(a, b)), N_FD)


def test_grad_spmm():
    def make(t):
        rng = np.random.default_rng(1000 + t)
        n = int(rng.integers(2, 8))
        return [Tensor(rng.normal(size=(n, int(rng.integers(1, 5)))), True)]
    def fwd(x):
        n = x.shape[0]
        rng = np.random.default_rng(n)  # pattern fixed given shape
        dense = rng.normal(size=(n, n)) * (rng.random((n, n)) < 0.5)
        indptr = np.zeros(n + 1, dtype=np.int64)
        cols, vals = [], []
        for i in range(n):
            nz = np.flatnonzero(dense[i])
            cols.extend(nz.tolist())
            vals.extend(dense[i, nz].tolist())
            indptr[i + 1] = len(cols)
        s = SparseMatrix((n, n), indptr, np.array(cols, dtype=np.int64), np.array(vals))
        return mean_all(spmm(s, x))
    finite_diff_check(make, fwd, N_FD)


def test_grad_spmm_values():
    """Gradient w.r.t. sparse values (needed only for learnable masks)."""
    rng = np.random.default_rng(5)
    indptr = np.array([0, 2, 3, 4])
    cols = np.array([0, 2, 1, 0])
    vals = rng.normal(size=4)
    x = Tensor(rng.normal(size=(3, 2)))

    def loss_value(values):
        dense = np.zeros((3, 3))
        for i in range(3):
            for p in range(indptr[i], indptr[i + 1]):
                dense[i, cols[p]] = values[p]
        return (dense @ x.data).mean()

    s = SparseMatrix((3, 3), indptr, cols, vals.copy(), requires_grad=True)
    with Tape() as tape:
        loss = mean_all(spmm(s, x))
    backward(tape, loss)
    eps = 1e-6
    for pos in range(4):
        up_vals, down_vals = vals.copy(), vals.copy()
        up_vals[pos] += eps
        down_vals[pos] -= eps
        fd = (loss_value(up_vals) - loss_value(down_vals)) / (2 * eps)
        assert abs(fd - s.grad[pos]) < 1e-4 * max(abs(fd), 1e-3)


@pytest.mark.parametrize("op,name", [
    (lambda x: elu(x), "elu"),
    (lambda x: sigmoid(x), "sigmoid"),
    (lambda x: multiply(x, x), "multiply"),
    (lambda x: affine(x, -1.5, 2.0), "affine"),
    (lambda x: mul_const(x, 0.7), "mul_const"),
    (lambda x: sum_all(x), "sum"),
])
def test_grad_elementwise(op, name):
    def make(t):
        rng = np.random.default_rng(hash(name) % 2**32 + t)
        r, c = rng.integers(1, 8, 2)
        return [Tensor(rng.normal(size=(r, c)), True)]
    finite_diff_check(make, lambda x: mean_all(op(x)), N_FD)


def test_grad_log():
    def make(t):
        rng = np.random.default_rng(2000 + t)
        r, c = rng.integers(1, 8, 2)
        return [Tensor(rng.uniform(0.1, 3.0, size=(r, c)), True)]
    finite_diff_check(make, lambda x: mean_all(log(x)), N_FD)


def test_grad_clip():
    def make(t):
        rng = np.random.default_rng(3000 + t)
        r, c = rng.integers(1, 8, 2)
        # keep away from the clip boundaries so FD is well-defined
        vals = rng.uniform(-2, 2, size=(r, c))
        vals = vals[np.abs(np.abs(vals) - 1.0) > 0.05].reshape(-1)
        if vals.size == 0:
            vals = np.array([0.5])
        return [Tensor(vals.reshape(1, -1), True)]
    finite_diff_check(make, lambda x: mean_all(clip(x, -1.0, 1.0)), N_FD)


def test_grad_add_and_bias():
    def make(t):
        rng = np.random.default_rng(4000 + t)
        r, c = rng.integers(1, 8, 2)
        return [Tensor(rng.normal(size=(r, c)), True),
                Tensor(rng.normal(size=(r, c)), True),
                Tensor(rng.normal(size=(1, c)), True)]
    finite_diff_check(make, lambda a, b, c: mean_all(add_bias(add(a, b), c)), N_FD)


def test_grad_gather_rows():
    def make(t):
        rng = np.random.default_rng(5000 + t)
        r, c = int(rng.integers(2, 8)), int(rng.integers(1, 8))
        return [Tensor(rng.normal(size=(r, c)), True)]
    def fwd(x):
        rng = np.random.default_rng(x.shape[0] * 31 + x.shape[1])
        idx = rng.integers(0, x.shape[0], size=6)
        return mean_all(elu(gather_rows(x, idx)))
    finite_diff_check(make, fwd, N_FD)


def test_grad_dropout_fixed_mask():
    def make(t):
        rng = np.random.default_rng(6000 + t)
        r, c = rng.integers(2, 8, 2)
        return [Tensor(rng.normal(size=(r, c)), True)]
    def fwd(x):
        rng = np.random.default_rng(99)  # same mask on every evaluation
        return mean_all(dropout(x, 0.4, rng, True))
    finite_diff_check(make, fwd, N_FD)


def test_grad_batchnorm_train_and_eval():
    for train in (True, False):
        def make(t, train=train):
            rng = np.random.default_rng(7000 + t)
            r, c = int(rng.integers(3, 8)), int(rng.integers(1, 5))
            return [Tensor(rng.normal(size=(r, c)), True),
                    Tensor(rng.normal(size=(1, c)), True),
                    Tensor(rng.normal(size=(1, c)), True)]
        def fwd(x, g, b, train=train):
            state = BatchNormState(x.shape[1])
            state.running_mean = np.full(x.shape[1], 0.3)
            state.running_var = np.full(x.shape[1], 1.7)
            return mean_all(sigmoid(batchnorm(x, g, b, state, train)))
        finite_diff_check(make, fwd, 50)


def test_grad_softmax_cross_entropy():
    def make(t):
        rng = np.random.default_rng(8000 + t)
        r, c = int(rng.integers(2, 8)), int(rng.integers(2, 6))
        return [Tensor(rng.normal(size=(r, c)), True)]
    def fwd(x):
        rng = np.random.default_rng(x.shape[0] * 131 + x.shape[1])
        labels = rng.integers(0, x.shape[1], size=x.shape[0])
        return softmax_cross_entropy(x, labels)
    finite_diff_check(make, fwd, N_FD)


def test_grad_composite_pipeline():
    """A deep composite touching most primitives at once."""
    def make(t):
        rng = np.random.default_rng(9000 + t)
        return [Tensor(rng.normal(size=(5, 4)), True), Tensor(rng.normal(size=(4, 3)), True),
                Tensor(rng.normal(size=(1, 3)), True)]
    def fwd(x, w, b):
        h = elu(add_bias(matmul(x, w), b))
        s = sigmoid(h)
        return mean_all(multiply(s, s))
    finite_diff_check(make, fwd, 30)


# -- grouped softmax ----------------------------------------------------------

def test_grouped_softmax_symmetric_group():
    out = grouped_softmax(np.zeros(3), np.array([0, 3]), 1.0)
    assert np.allclose(out, 1 / 3)


def test_grouped_softmax_closed_form():
    out = grouped_softmax(np.array([np.log(2), 0.0]), np.array([0, 2]), 1.0)
    assert np.allclose(out, [2 / 3, 1 / 3], atol=1e-15)


def test_grouped_softmax_low_temperature_one_hot():
    out = grouped_softmax(np.array([5.0, 0.0, 0.0]), np.array([0, 3]), 1e-6)
    assert out[0] > 1 - 1e-9
    assert out[1] < 1e-9 and out[2] < 1e-9


def test_grouped_softmax_groups_sum_to_one_extreme_scores():
    rng = np.random.default_rng(0)
    for _ in range(50):
        sizes = rng.integers(1, 9, size=12)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        scores = rng.uniform(-1e4, 1e4, size=offsets[-1])
        for tau in (1e-6, 0.5, 1.0, 1e6):
            out = grouped_softmax(scores, offsets, tau)
            sums = np.add.reduceat(out, offsets[:-1])
            assert np.all(np.abs(sums - 1.0) < 1e-12)
            assert np.all(out >= 0)


def test_grouped_softmax_errors():
    with pytest.raises(ValueError, match="temperature"):
        grouped_softmax(np.ones(2), np.array([0, 2]), 0.0)
    with pytest.raises(ValueError, match="empty group"):
        grouped_softmax(np.ones(2), np.array([0, 0, 2]), 1.0)

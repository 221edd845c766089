"""Central finite-difference check of analytic gradients."""

import numpy as np

from .tensor import ParamSet


def _wrap(tensors):
    """ParamSet view over existing tensors (a list or a name -> tensor dict), no copies."""
    pairs = tensors.items() if isinstance(tensors, dict) else ((f"t{i}", t) for i, t in enumerate(tensors))
    out = ParamSet.__new__(ParamSet)
    out._tensors = dict(pairs)
    return out


def relative_error(analytic, numeric, floor=1e-8):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def _central(forward, params, flat, i, eps):
    orig = flat[i]
    flat[i] = orig + eps
    fp = forward(params).item()
    flat[i] = orig - eps
    fm = forward(params).item()
    flat[i] = orig
    return (fp - fm) / (2.0 * eps)


def grad_check(forward, params, eps=1e-5, max_per_tensor=None, rng=None, return_details=False,
               tol=1e-4, retries=2):
    """Largest relative error between backprop and central differences.

    ``forward(params)`` must return a scalar Tensor.  ``params`` is a
    ParamSet or a list/dict of tensors (perturbed in place).  Every scalar of every
    parameter is perturbed by ``+-eps`` unless ``max_per_tensor`` is given,
    in which case that many entries per tensor are drawn with ``rng``
    (every tensor is still covered).

    An entry whose error exceeds ``tol`` is re-measured with ``eps / 10``
    (up to ``retries`` times): a ReLU or max-pool kink inside the
    ``+-eps`` bracket biases the difference quotient, while a wrong
    analytic gradient stays wrong at every step size.
    """
    if not isinstance(params, ParamSet):
        params = _wrap(params)
    for t in params.values():
        # perturbation below goes through a flat view, which must alias the data
        t.data = np.ascontiguousarray(t.data)
    params.zero_grad()
    forward(params).backward()
    analytic = {name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
                for name, t in params.items()}
    params.zero_grad()

    rng = rng if rng is not None else np.random.default_rng(0)
    worst = 0.0
    details = []
    for name, t in params.items():
        flat = t.data.reshape(-1)
        if max_per_tensor is None or max_per_tensor >= flat.size:
            idx = range(flat.size)
        else:
            idx = sorted(rng.choice(flat.size, size=max_per_tensor, replace=False).tolist())
        for i in idx:
            a = float(analytic[name].reshape(-1)[i])
            h = eps
            numeric = _central(forward, params, flat, i, h)
            err = relative_error(a, numeric)
            for _ in range(retries):
                if err <= tol:
                    break
                h /= 10.0
                numeric = _central(forward, params, flat, i, h)
                err = min(err, relative_error(a, numeric))
            worst = max(worst, err)
            if return_details:
                details.append((name, i, a, numeric, err))
    return (worst, details) if return_details else worst


# -- whole-network cases on tiny inputs ----------------------------------------------

# smallest inputs that give a non-trivial output for each network
TINY_INPUTS = {"interp": (23, 23), "align": (13, 13, 13), "sr": (15, 15, 15), "disc": (36, 36)}
NETWORKS = ("interp", "align", "sr", "disc")


def randomize_zero_layers(params, rng, scale=0.1):
    """Give all-zero tensors (zero-initialized output layers) random values.

    With an all-zero output layer every upstream gradient vanishes, so the
    check would only exercise that one layer.
    """
    for t in params.values():
        if not np.any(t.data):
            t.data = scale * rng.standard_normal(t.data.shape)
    return params


def network_case(kind, seed=0):
    """(params, forward) for a grad check of one full network, dropout off.

    ``forward(params)`` returns ``sum(output * r)`` for a fixed random ``r``
    so every output element contributes with a distinct weight.
    """
    from . import nets
    from .tensor import Tensor, mul, tsum

    rng = np.random.default_rng(seed)
    if kind == "disc":
        params, _ = nets.build_discriminator(2, TINY_INPUTS["disc"], seed)
        a, b = (rng.standard_normal(TINY_INPUTS["disc"]) for _ in range(2))
        randomize_zero_layers(params, rng)
        return params, lambda p: nets.forward_discriminator(p, [a, b], training=False)
    params, _ = nets.build(kind, seed)
    randomize_zero_layers(params, rng)
    if kind == "interp":
        a, b = (rng.standard_normal(TINY_INPUTS["interp"]) for _ in range(2))
        run = lambda p: nets.forward_interp(p, a, b)  # noqa: E731
    elif kind in ("align", "sr"):
        x = rng.standard_normal(TINY_INPUTS[kind])
        fwd = nets.forward_align if kind == "align" else nets.forward_sr
        run = lambda p: fwd(p, x)  # noqa: E731
    else:
        raise ValueError(f"unknown network {kind!r}; choose from {NETWORKS}")
    r = Tensor(rng.standard_normal(run(params.detached()).shape))
    return params, lambda p: tsum(mul(run(p), r))


def check_network(kind, seed=0, max_per_tensor=4, eps=1e-5):
    params, forward = network_case(kind, seed)
    return grad_check(forward, params, eps=eps, max_per_tensor=max_per_tensor,
                      rng=np.random.default_rng(seed + 1))

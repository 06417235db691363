import numpy as np
import pytest

import symconv


def test_class_tokens():
    assert symconv.symmetry_classes() == [
        "standard", "v", "h", "d", "hv", "hvd", "anti_hvd",
    ]


def test_free_counts():
    counts = {c: symconv.free_param_count(c, 3) for c in symconv.symmetry_classes()}
    assert counts == {
        "standard": 9, "v": 6, "h": 6, "d": 6, "hv": 4, "hvd": 3, "anti_hvd": 3,
    }
    assert symconv.free_param_count("hvd", 5) == 6
    assert symconv.compression_ratio("hvd", 3) == pytest.approx(3 / 9)
    with pytest.raises(symconv.ConfigError):
        symconv.free_param_count("hvd", 4)  # even kernels have no center


def test_tying_map_expand_project_roundtrip():
    m = symconv.TyingMap("hvd", 3)
    free = np.array([1.5, -2.0, 0.25])
    kernel = m.expand(free)
    assert kernel.shape == (3, 3)
    # full dihedral symmetry: invariant under both flips and transpose
    assert np.array_equal(kernel, kernel[::-1, :])
    assert np.array_equal(kernel, kernel[:, ::-1])
    assert np.array_equal(kernel, kernel.T)
    assert np.allclose(m.project(kernel), free)


def test_anti_hvd_sign_mask():
    m = symconv.TyingMap("anti_hvd", 3)
    kernel = m.expand(np.array([1.0, 2.0, 3.0]))
    expected = np.array([
        [-1.0, -2.0, -1.0],
        [-2.0, 3.0, -2.0],
        [-1.0, -2.0, -1.0],
    ])
    assert np.array_equal(kernel, expected)


def test_projection_is_least_squares():
    rng = np.random.default_rng(7)
    m = symconv.TyingMap("v", 5)
    dense = rng.normal(size=(5, 5))
    projected = m.expand(m.project(dense))
    # residual orthogonal to the symmetric subspace
    residual = dense - projected
    for _ in range(10):
        probe = m.expand(rng.normal(size=m.free_count))
        assert abs(np.sum(residual * probe)) < 1e-12


def test_conv2d_forward_matches_numpy():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2, 3, 8, 8))
    k = rng.normal(size=(4, 3, 3, 3))
    out = symconv.conv2d_forward(x, k, stride=1, padding=1)
    assert out.shape == (2, 4, 8, 8)
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ref = np.zeros_like(out)
    for o in range(4):
        for i in range(3):
            for j in range(3):
                ref[:, o, :, :] += np.einsum(
                    "nchw,c->nhw", xp[:, :, i : i + 8, j : j + 8], k[o, :, i, j]
                )
    assert np.allclose(out, ref, atol=1e-10)


def test_constrained_layer_fast_path():
    layer = symconv.ConstrainedConv2d(
        2, 4, 3, assignments=["h", "v", "hvd", "anti_hvd"], padding=1
    )
    rng = np.random.default_rng(11)
    layer.free_weights = rng.normal(size=layer.free_weights.shape)
    x = rng.normal(size=(2, 2, 6, 6))

    naive = layer.forward(x)
    fast, multiplies, adds = layer.fast_forward(x)
    assert np.allclose(naive, fast, rtol=1e-10)
    assert multiplies == layer.multiply_count(2, 6, 6)
    # (6+6+3+3) free coefficients vs 4 filters x 9 weights
    assert multiplies * 2 == layer.naive_multiply_count(2, 6, 6)
    assert adds > 0


def test_gradients_match_finite_differences():
    layer = symconv.ConstrainedConv2d(1, 2, 3, assignments=["hvd", "anti_hvd"])
    rng = np.random.default_rng(5)
    w0 = rng.normal(size=layer.free_weights.shape)
    layer.free_weights = w0
    x = rng.normal(size=(1, 1, 5, 5))
    gy = rng.normal(size=layer.forward(x).shape)

    grads = layer.backward(x, gy)
    h = 1e-6
    for i in range(w0.size):
        for sign, dst in ((+1, "hi"), (-1, "lo")):
            w = w0.copy()
            w[i] += sign * h
            layer.free_weights = w
            if dst == "hi":
                hi = np.sum(layer.forward(x) * gy)
            else:
                lo = np.sum(layer.forward(x) * gy)
        fd = (hi - lo) / (2 * h)
        assert grads["grad_free"][i] == pytest.approx(fd, rel=1e-5)
    layer.free_weights = w0


def test_allocate_filters_blocks():
    tokens = symconv.allocate_filters("type_i", 10)
    assert tokens == ["h"] * 3 + ["v"] * 3 + ["hvd"] * 2 + ["anti_hvd"] * 2


def test_builtin_param_accounting():
    base = symconv.count_params("resnet56", "standard")
    tied = symconv.count_params("resnet56", "type_i")
    assert base["total_standard"] == 853018
    assert tied["total_free"] == 428866
    assert tied["conv_weight_ratio"] == pytest.approx(0.5)
    with pytest.raises(symconv.ConfigError):
        symconv.count_params("resnet99")


def test_shape_errors_surface_as_python_exceptions():
    m = symconv.TyingMap("hvd", 3)
    with pytest.raises(symconv.ShapeError):
        m.expand(np.zeros(5))

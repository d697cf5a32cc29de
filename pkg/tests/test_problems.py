import math
import struct

import numpy as np
import pytest

from sdcam.oracles import check_gradient, check_vjp
from sdcam.problems import (
    IdxData,
    load_instance,
    mimo_generate,
    mimo_initial_point,
    mimo_problem,
    mlp_generate,
    mlp_initial_point,
    mlp_problem,
    mlp_sup_abs_fg,
    qcqp_generate,
    qcqp_initial_point,
    qcqp_problem,
    read_idx,
    relative_feasibility,
    save_instance,
)
from sdcam.problems.mimo import phi, mimo_sup_abs_fg


# --- QCQP ---------------------------------------------------------------------


def test_qcqp_structure_seed7():
    inst = qcqp_generate(7, n=4, m=2)
    for Qi in inst.Q:
        assert np.linalg.eigvalsh(Qi).min() >= -1e-10
    assert np.all(inst.ri < 0.0)
    assert inst.r > 0.0
    np.testing.assert_allclose(inst.Q0, np.eye(4))
    np.testing.assert_allclose(inst.bi, 0.0)


def test_qcqp_zero_strictly_feasible():
    inst = qcqp_generate(7, n=4, m=2)
    prob = qcqp_problem(inst)
    c0 = np.asarray(prob.c.value(np.zeros(4)))
    assert np.all(c0 < 0.0)


def test_qcqp_bit_reproducible():
    a = qcqp_generate(11, n=6, m=3)
    b = qcqp_generate(11, n=6, m=3)
    np.testing.assert_array_equal(a.b0, b.b0)
    np.testing.assert_array_equal(a.Q, b.Q)
    np.testing.assert_array_equal(a.ri, b.ri)
    c = qcqp_generate(12, n=6, m=3)
    assert not np.array_equal(a.b0, c.b0)


def test_qcqp_validation():
    with pytest.raises(ValueError, match="n >= 2"):
        qcqp_generate(1, n=1, m=1)
    with pytest.raises(ValueError, match="m >= 1"):
        qcqp_generate(1, n=4, m=0)


def test_qcqp_oracles_pass_fd_checks():
    inst = qcqp_generate(1, n=8, m=3)
    prob = qcqp_problem(inst)
    rng = np.random.default_rng(0)
    for _ in range(3):
        x = rng.uniform(-inst.r, inst.r, 8)
        assert check_gradient(prob.f, x).passed
        assert check_vjp(prob.c, x, rng=rng).passed


def test_qcqp_initial_point_feasible():
    inst = qcqp_generate(1, n=8, m=3)
    prob = qcqp_problem(inst)
    x0, y0 = qcqp_initial_point(inst)
    assert math.isfinite(prob.g.value(x0))
    assert prob.h.value(y0) == 0.0


def test_qcqp_lipschitz_constants_dominate_samples():
    inst = qcqp_generate(2, n=6, m=3)
    prob = qcqp_problem(inst)
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.uniform(-inst.r, inst.r, 6)
        # Jacobian rows are Qi x; Frobenius bound must dominate spectral norm
        J = np.einsum("ijk,k->ij", inst.Q, x)
        assert np.linalg.norm(J, 2) <= prob.c.jac_norm_bound + 1e-9


def test_relative_feasibility_examples():
    inst = qcqp_generate(7, n=4, m=2)
    # direct formula checks with synthetic constraint values
    cx = np.array([-1.0, 2.0])
    rref = np.array([0.5, 3.0])
    val = float(np.linalg.norm(np.maximum(cx, 0.0) / np.maximum(rref, 1.0)))
    assert val == pytest.approx(2.0 / 3.0)
    # feasible points give zero
    assert relative_feasibility(inst, np.zeros(4)) == pytest.approx(0.0)


# --- MIMO ---------------------------------------------------------------------


def test_phi_at_zero_phase():
    np.testing.assert_allclose(phi(np.ones(1), np.zeros(1)), [1.0, 0.0])


def test_mimo_c_zero_at_zero_phase():
    inst = mimo_generate(0, n=4, m=8)
    prob = mimo_problem(inst)
    x0, _ = mimo_initial_point(inst)
    np.testing.assert_allclose(prob.c.value(x0), 0.0, atol=1e-15)
    assert prob.h.value(np.asarray(prob.c.value(x0))) == pytest.approx(0.0)


def test_mimo_barrier_is_c1_at_knee():
    from sdcam.problems.mimo import _gamma, _gamma_prime

    r_lo = 0.5
    t = np.array([r_lo])
    eps = 1e-9
    below = _gamma(t - eps, r_lo)[0]
    above = _gamma(t + eps, r_lo)[0]
    assert below == pytest.approx(1.0 / r_lo, abs=1e-6)
    assert above == pytest.approx(1.0 / r_lo, abs=1e-6)
    assert _gamma_prime(t - eps, r_lo)[0] == pytest.approx(-1.0 / r_lo**2, abs=1e-6)
    assert _gamma_prime(t + eps, r_lo)[0] == pytest.approx(-1.0 / r_lo**2, abs=1e-6)


def test_mimo_gradient_everywhere_on_and_off_box():
    inst = mimo_generate(0, n=4, m=8)
    prob = mimo_problem(inst)
    rng = np.random.default_rng(1)
    for _ in range(5):
        # includes r below r_lo: the linear barrier extension keeps f smooth
        x = np.concatenate([rng.uniform(0.1, 1.2, 4), rng.uniform(-3, 3, 4)])
        assert check_gradient(prob.f, x, rng=rng).passed
        assert check_vjp(prob.c, x, rng=rng).passed


def test_mimo_constants_and_bounds():
    inst = mimo_generate(0, n=4, m=8, p_psk=4)
    prob = mimo_problem(inst)
    assert prob.c.jac_norm_bound == pytest.approx(2.0)  # p_psk/2
    assert prob.c.jac_lipschitz_bound == pytest.approx(4.0)  # p_psk^2/4
    assert prob.h_lipschitz_bound == pytest.approx(inst.lambda2 * 2.0)
    # h on the image of c is at most lambda2 * n since |sin| <= 1
    rng = np.random.default_rng(2)
    for _ in range(10):
        x = rng.standard_normal(8)
        hv = prob.h.value(np.asarray(prob.c.value(x)))
        assert hv <= prob.h_sup_on_image_bound + 1e-12
    # |f+g| bound at random box points
    bound = mimo_sup_abs_fg(inst)
    for _ in range(10):
        x = np.concatenate([rng.uniform(inst.r_lo, 1.0, 4), rng.uniform(-3, 3, 4)])
        assert abs(prob.f.value(x)) <= bound + 1e-9


def test_mimo_validation():
    with pytest.raises(ValueError):
        mimo_generate(0, n=0, m=1)
    with pytest.raises(ValueError):
        mimo_generate(0, n=2, m=2, p_psk=1)
    with pytest.raises(ValueError):
        mimo_generate(0, n=2, m=2, r_lo=0.0)


# --- MLP ----------------------------------------------------------------------


def test_mlp_zero_weights_collapse():
    # with tanh, the zero parameter vector maps every input to 0, so
    # c(0) = -targets and C_radius = sum |y_i|^p / (p * lam * m)
    inst = mlp_generate(0, layer_dims=(5, 3, 1), n_samples=10)
    prob = mlp_problem(inst)
    c0 = np.asarray(prob.c.value(np.zeros(inst.param_count)))
    np.testing.assert_allclose(c0, -inst.targets, atol=1e-15)
    expected_R = float(
        np.sum(np.abs(inst.targets) ** inst.p) / inst.p / (inst.lam * 10)
    )
    assert inst.C_radius == pytest.approx(expected_R)
    assert inst.C_radius > 0.0


def test_mlp_vjp_seed0_dims_4321():
    inst = mlp_generate(0, layer_dims=(4, 3, 2, 1), n_samples=15)
    prob = mlp_problem(inst)
    rng = np.random.default_rng(0)
    for _ in range(10):
        v = rng.standard_normal(inst.param_count) * 0.3
        assert check_vjp(prob.c, v, rng=rng).passed


def test_mlp_sigmoid_activation_vjp():
    inst = mlp_generate(1, layer_dims=(4, 3, 1), n_samples=10, activation="sigmoid")
    prob = mlp_problem(inst)
    rng = np.random.default_rng(1)
    v = rng.standard_normal(inst.param_count) * 0.3
    assert check_vjp(prob.c, v, rng=rng).passed


def test_mlp_initial_point_inside_box():
    inst = mlp_generate(0)
    x0, y0 = mlp_initial_point(inst)
    assert np.all(np.abs(x0) <= inst.C_radius)
    assert x0.size == inst.param_count
    assert y0.size == 100
    prob = mlp_problem(inst)
    assert math.isfinite(prob.g.value(x0))


def test_mlp_h_image_bound_holds_on_box_samples():
    inst = mlp_generate(0, layer_dims=(5, 4, 1), n_samples=12)
    prob = mlp_problem(inst)
    rng = np.random.default_rng(3)
    for _ in range(10):
        v = rng.uniform(-inst.C_radius, inst.C_radius, inst.param_count)
        hv = prob.h.value(np.asarray(prob.c.value(v)))
        assert hv <= prob.h_sup_on_image_bound + 1e-12
        assert abs(prob.f.value(v) + prob.g.value(v)) <= mlp_sup_abs_fg(inst) + 1e-9


def test_mlp_validation():
    with pytest.raises(ValueError, match="end in 1"):
        mlp_generate(0, layer_dims=(4, 3))
    with pytest.raises(ValueError):
        mlp_generate(0, n_samples=0)
    with pytest.raises(ValueError):
        mlp_generate(0, p=1.0)
    with pytest.raises(ValueError):
        mlp_generate(0, activation="relu")
    with pytest.raises(ValueError):
        mlp_generate(0, source="parquet")
    with pytest.raises(ValueError, match="images_path"):
        mlp_generate(0, source="idx")


def test_mlp_reproducible():
    a = mlp_generate(5, layer_dims=(6, 4, 1), n_samples=8)
    b = mlp_generate(5, layer_dims=(6, 4, 1), n_samples=8)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.targets, b.targets)
    assert a.C_radius == b.C_radius


# --- IDX reader -----------------------------------------------------------------


def _write(path, payload: bytes):
    with open(path, "wb") as fh:
        fh.write(payload)


def test_read_idx_single_pixel_image(tmp_path):
    path = tmp_path / "img.idx"
    _write(path, struct.pack(">IIII", 0x00000803, 1, 1, 1) + bytes([255]))
    out = read_idx(str(path))
    assert out.dims == (1, 1, 1)
    assert out.data.shape == (1, 1, 1)
    assert out.data[0, 0, 0] == 255


def test_read_idx_labels(tmp_path):
    path = tmp_path / "labels.idx"
    _write(path, struct.pack(">II", 0x00000801, 3) + bytes([0, 4, 9]))
    out = read_idx(str(path))
    assert out.dims == (3,)
    np.testing.assert_array_equal(out.data, [0, 4, 9])


def test_read_idx_empty_file(tmp_path):
    path = tmp_path / "empty.idx"
    _write(path, b"")
    with pytest.raises(ValueError, match="truncated header at offset 0"):
        read_idx(str(path))


def test_read_idx_bad_magic(tmp_path):
    path = tmp_path / "bad.idx"
    _write(path, struct.pack(">I", 0xDEADBEEF))
    with pytest.raises(ValueError, match="bad magic 0xdeadbeef at offset 0"):
        read_idx(str(path))


def test_read_idx_truncated_header_and_payload(tmp_path):
    path = tmp_path / "short.idx"
    _write(path, struct.pack(">II", 0x00000803, 2))  # images need 3 dims
    with pytest.raises(ValueError, match="truncated header at offset 8"):
        read_idx(str(path))
    path2 = tmp_path / "short2.idx"
    _write(path2, struct.pack(">II", 0x00000801, 5) + bytes([1, 2]))
    with pytest.raises(ValueError, match="truncated payload"):
        read_idx(str(path2))


def test_mlp_idx_source(tmp_path):
    img = tmp_path / "img.idx"
    lab = tmp_path / "lab.idx"
    rng = np.random.default_rng(0)
    pixels = rng.integers(0, 256, (6, 2, 2), dtype=np.uint8)
    labels = rng.integers(0, 10, 6, dtype=np.uint8)
    _write(img, struct.pack(">IIII", 0x00000803, 6, 2, 2) + pixels.tobytes())
    _write(lab, struct.pack(">II", 0x00000801, 6) + labels.tobytes())
    inst = mlp_generate(
        0,
        layer_dims=(4, 3, 1),
        n_samples=6,
        source="idx",
        images_path=str(img),
        labels_path=str(lab),
    )
    np.testing.assert_allclose(inst.features, pixels.reshape(6, 4) / 255.0)
    np.testing.assert_allclose(inst.targets, (labels - 4.5) / 4.5)


# --- serialization round trip ---------------------------------------------------


def _assert_instances_equal(a, b):
    assert type(a) is type(b)
    import dataclasses

    for field in dataclasses.fields(a):
        va, vb = getattr(a, field.name), getattr(b, field.name)
        if isinstance(va, np.ndarray):
            np.testing.assert_array_equal(va, vb, err_msg=field.name)
        else:
            assert va == vb, field.name


@pytest.mark.parametrize("family", ["qcqp", "mimo", "mlp"])
def test_round_trip_exact(tmp_path, family):
    if family == "qcqp":
        inst = qcqp_generate(3, n=5, m=2)
    elif family == "mimo":
        inst = mimo_generate(3, n=3, m=6)
    else:
        inst = mlp_generate(3, layer_dims=(5, 3, 1), n_samples=7)
    path = tmp_path / f"{family}.json"
    save_instance(inst, str(path))
    again = load_instance(str(path))
    _assert_instances_equal(inst, again)
    # serialization is deterministic: a second write is byte-identical
    path2 = tmp_path / f"{family}_2.json"
    save_instance(again, str(path2))
    assert path.read_bytes() == path2.read_bytes()


def test_load_rejects_bad_documents(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format_version": 2, "family": "qcqp", "seed": 0, "params": {}, "data": {}}')
    with pytest.raises(ValueError, match="format_version"):
        load_instance(str(bad))
    bad.write_text('{"format_version": 1, "family": "lp", "seed": 0, "params": {}, "data": {}}')
    with pytest.raises(ValueError, match="unknown family"):
        load_instance(str(bad))
    bad.write_text('{"format_version": 1, "family": "qcqp", "seed": 0, "params": {}, "data": {}}')
    with pytest.raises(ValueError, match="missing field"):
        load_instance(str(bad))

"""Hash-code learning: likelihood loss, gradients, sign update, trainer."""

import numpy as np
import pytest

from tailhash import autoencoder, datagen, experiment, hashing, meta, nn
from tailhash.verify import check_sign_update


def test_phi_orthogonal_columns():
    Mx = np.array([[1.0], [0.0]])
    My = np.array([[0.0], [1.0]])
    ph = hashing.phi(Mx, My)
    assert ph[0, 0] == 0.0
    assert nn.sigmoid(ph)[0, 0] == 0.5


def test_phi_unit_diagonal():
    M = np.array([[1.0, 0.0], [0.0, 1.0]])
    ph = hashing.phi(M, M)
    assert ph[0, 0] == 0.5 and ph[1, 1] == 0.5


def test_phi_matches_direct_inner_products():
    rng = np.random.default_rng(0)
    Mx = rng.standard_normal((4, 3))
    My = rng.standard_normal((4, 3))
    ph = hashing.phi(Mx, My)
    for i in range(3):
        for j in range(3):
            assert ph[i, j] == pytest.approx(0.5 * Mx[:, i] @ My[:, j])


def test_loss2_hand_computed_single_sample():
    # k=1, n=1, Mx=My=B=+1, S=1: phi=0.5, NLL = -(0.5 - log(1+e^0.5)),
    # quantization 0, balance eta*(1+1)
    hyper = hashing.HashHyper(gamma=1.0, eta=1.0)
    one = np.array([[1.0]])
    total, parts = hashing.loss2(one, one, np.array([[1.0]]), one, hyper)
    nll = -(0.5 - np.log(1 + np.exp(0.5)))
    assert parts["nll"] == pytest.approx(nll)
    assert parts["quantization"] == 0.0
    assert parts["balance"] == pytest.approx(2.0)
    assert total == pytest.approx(nll + 2.0)


def test_loss2_zero_phi_gives_n2_log2():
    # gamma = eta = 0 and phi identically zero: loss = n^2 log 2
    hyper = hashing.HashHyper(gamma=0.0, eta=0.0)
    Mx = np.zeros((2, 3))
    My = np.zeros((2, 3))
    total, _ = hashing.loss2(Mx, My, np.zeros((3, 3)), np.ones((2, 3)), hyper)
    assert total == pytest.approx(9 * np.log(2))


def test_loss2_gamma_scales_quantization_only():
    rng = np.random.default_rng(1)
    Mx = rng.standard_normal((3, 4))
    My = rng.standard_normal((3, 4))
    S = np.eye(4)
    B = np.where(rng.random((3, 4)) < 0.5, 1.0, -1.0)
    t1, p1 = hashing.loss2(Mx, My, S, B, hashing.HashHyper(gamma=1.0, eta=0.5))
    t2, p2 = hashing.loss2(Mx, My, S, B, hashing.HashHyper(gamma=2.0, eta=0.5))
    assert p1["nll"] == p2["nll"] and p1["balance"] == p2["balance"]
    assert t2 - t1 == pytest.approx(p1["quantization"])


def test_loss2_decomposition_exact():
    rng = np.random.default_rng(2)
    Mx = rng.standard_normal((3, 4))
    My = rng.standard_normal((3, 4))
    S = (rng.random((4, 4)) < 0.5).astype(float)
    B = np.where(rng.random((3, 4)) < 0.5, 1.0, -1.0)
    hyper = hashing.HashHyper(gamma=0.7, eta=0.3)
    total, parts = hashing.loss2(Mx, My, S, B, hyper)
    assert total == pytest.approx(
        parts["nll"] + 0.7 * parts["quantization"] + 0.3 * parts["balance"],
        abs=1e-10)


def test_loss2_overflow_safe():
    hyper = hashing.HashHyper(gamma=0.0, eta=0.0)
    big = np.full((2, 2), 1000.0)
    total, _ = hashing.loss2(big, big, np.ones((2, 2)), np.ones((2, 2)), hyper)
    assert np.isfinite(total)


def test_grad_zero_at_stationary_point():
    # S = sigma(phi), B = Mx, zero column sums -> gradient exactly zero
    Mx = np.array([[1.0, -1.0], [1.0, -1.0]])
    My = np.array([[1.0, -1.0], [-1.0, 1.0]])
    S = nn.sigmoid(hashing.phi(Mx, My))
    hyper = hashing.HashHyper(gamma=1.0, eta=1.0)
    g = hashing.grad_meta_x(Mx, My, S, Mx, hyper)
    np.testing.assert_allclose(g, 0.0, atol=1e-12)


def test_grad_matches_finite_differences():
    rng = np.random.default_rng(3)
    hyper = hashing.HashHyper(gamma=0.7, eta=0.3)
    for _ in range(5):
        k, n = 4, 5
        Mx = rng.standard_normal((k, n))
        My = rng.standard_normal((k, n))
        S = (rng.random((n, n)) < 0.5).astype(float)
        B = np.where(rng.random((k, n)) < 0.5, 1.0, -1.0)
        gx = hashing.grad_meta_x(Mx, My, S, B, hyper)
        gy = hashing.grad_meta_y(Mx, My, S, B, hyper)
        fx = nn.finite_diff_grad(
            lambda M: hashing.loss2(M, My, S, B, hyper)[0], Mx)
        fy = nn.finite_diff_grad(
            lambda M: hashing.loss2(Mx, M, S, B, hyper)[0], My)
        for analytic, numeric in ((gx, fx), (gy, fy)):
            err = np.linalg.norm(analytic - numeric) / max(
                np.linalg.norm(numeric), 1e-12)
            assert err <= 1e-4


def test_grad_role_exchange_symmetry():
    rng = np.random.default_rng(4)
    Mx = rng.standard_normal((3, 4))
    My = rng.standard_normal((3, 4))
    S = np.maximum((rng.random((4, 4)) < 0.5).astype(float),
                   (rng.random((4, 4)) < 0.5).astype(float).T)
    S = np.maximum(S, S.T)
    B = np.where(rng.random((3, 4)) < 0.5, 1.0, -1.0)
    hyper = hashing.HashHyper(gamma=0.7, eta=0.3)
    gy = hashing.grad_meta_y(Mx, My, S, B, hyper)
    gx_swapped = hashing.grad_meta_x(My, Mx, S.T, B, hyper)
    np.testing.assert_allclose(gy, gx_swapped, atol=1e-12)


def test_update_B_all_positive():
    Mx = np.abs(np.random.default_rng(5).standard_normal((3, 4)))
    assert np.all(hashing.update_B(Mx, Mx) == 1.0)


def test_update_B_tie_break_plus_one():
    assert hashing.update_B(np.array([[1.0]]), np.array([[-1.0]]))[0, 0] == 1.0


def test_update_B_entries_exactly_pm1():
    rng = np.random.default_rng(6)
    B = hashing.update_B(rng.standard_normal((4, 7)),
                         rng.standard_normal((4, 7)))
    assert set(np.unique(B)) <= {-1.0, 1.0}


def test_update_B_exhaustive_optimality():
    name, passed, detail = check_sign_update(seed=0, trials=100)
    assert passed, detail


def test_hyper_validation():
    with pytest.raises(ValueError):
        hashing.HashHyper(gamma=-0.1)


# -------------------------------------------------------------- phase-2 trainer

def _small_setup(seed=0):
    spec = datagen.LongTailSpec(c=4, z1=40, imbalance_factor=8.0,
                                raw_dim_x=10, raw_dim_y=8, shared_dim=3,
                                private_dim=2, noise_sigma=0.3,
                                secondary_label_prob=0.3, seed=seed)
    ds = datagen.generate(spec)
    ds = datagen.split(ds, 10, seed=seed)
    cfg = experiment.RunConfig(k=4, max_epochs=3, seed=seed)
    icae, side = experiment.init_params(ds, cfg)
    autoencoder.calibrate_code_scales(icae, *ds.base()[:2])
    return ds, icae, side


def test_train_hash_zero_epochs():
    ds, icae, side = _small_setup()
    before = nn.get_flat(side.x.projector).copy()
    hyper = hashing.HashHyper(batch_size=16, max_epochs=0)
    side, B, trace = hashing.train_hash(ds, icae, side, hyper)
    assert trace == []
    np.testing.assert_array_equal(nn.get_flat(side.x.projector), before)
    # B comes from the initial parameters and is exactly binary
    assert set(np.unique(B)) <= {-1.0, 1.0}
    assert B.shape == (4, ds.base_indices.size)


def test_train_hash_loss_decreases():
    spec = datagen.LongTailSpec(c=8, z1=120, imbalance_factor=20.0,
                                noise_sigma=0.5, seed=2)
    ds = datagen.generate(spec)   # n ~ 500
    ds = datagen.split(ds, 50, seed=2)
    cfg = experiment.RunConfig(k=16, max_epochs=10, seed=2)
    icae, side = experiment.init_params(ds, cfg)
    autoencoder.calibrate_code_scales(icae, *ds.base()[:2])
    hyper = hashing.HashHyper(batch_size=128, max_epochs=10)
    side, B, trace = hashing.train_hash(ds, icae, side, hyper, seed=2)
    assert len(trace) == 10
    assert trace[-1] < trace[0]
    assert set(np.unique(B)) <= {-1.0, 1.0}


def test_train_hash_trace_length():
    ds, icae, side = _small_setup(1)
    hyper = hashing.HashHyper(batch_size=16, max_epochs=4)
    _, _, trace = hashing.train_hash(ds, icae, side, hyper, seed=1)
    assert len(trace) == 4


def test_train_hash_deterministic():
    outs = []
    for _ in range(2):
        ds, icae, side = _small_setup(3)
        hyper = hashing.HashHyper(batch_size=16, max_epochs=3)
        side, B, trace = hashing.train_hash(ds, icae, side, hyper, seed=3)
        outs.append((B.copy(), trace))
    np.testing.assert_array_equal(outs[0][0], outs[1][0])
    assert outs[0][1] == outs[1][1]


def test_train_hash_frozen_autoencoder():
    ds, icae, side = _small_setup(4)
    before = {name: nn.get_flat(net).copy() for name, net in icae.nets().items()}
    hyper = hashing.HashHyper(batch_size=16, max_epochs=2)
    hashing.train_hash(ds, icae, side, hyper, seed=4)
    for name, net in icae.nets().items():
        np.testing.assert_array_equal(nn.get_flat(net), before[name])


def test_variant_flags():
    assert hashing.VARIANTS["full"].flags("x") == (True, True)
    assert hashing.VARIANTS["wo_c"].flags("x") == (False, True)
    assert hashing.VARIANTS["wo_i"].flags("y") == (True, False)
    assert hashing.VARIANTS["wo_ic"].flags("x") == (False, False)
    # disabling one modality's meta features leaves the other intact
    assert hashing.VARIANTS["wo_meta_i"].flags("x") == (False, False)
    assert hashing.VARIANTS["wo_meta_i"].flags("y") == (True, True)
    assert hashing.VARIANTS["wo_meta_t"].flags("y") == (False, False)
    assert hashing.VARIANTS["wo_meta_t"].flags("x") == (True, True)


def test_wo_ic_variant_equals_selectors_forced_zero():
    # the wo_ic ablation must equal the full formula with both terms zeroed
    ds, icae, side = _small_setup(5)
    Xb, Yb, _ = ds.base()
    Mx, My, B = hashing.full_base_codes(ds, icae, side,
                                        hashing.VARIANTS["wo_ic"])
    Fx = meta.direct_features(side.x.projector, Xb)
    Fy = meta.direct_features(side.y.projector, Yb)
    np.testing.assert_array_equal(Mx, Fx.T)
    np.testing.assert_array_equal(My, Fy.T)

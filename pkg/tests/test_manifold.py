"""Deformation-map consistency, inversion, encoding, and anchor fitting."""

import numpy as np
import pytest

from mpmrom.errors import NonConvergenceError
from mpmrom.manifold import (
    CorrectionFields,
    DecoderNetwork,
    ScalingSpec,
    build_encoder,
    decode,
    decode_with_gradient,
    default_decoder,
    deformation_gradient,
    encode,
    encoder_forward,
    fit_anchor_latent,
    flatten_snapshots,
    initial_latent_fit,
    invert_map,
    invert_map_batch,
    latent_jacobian,
    manifold_velocity,
)
from mpmrom.manifold.decoder import VbarField  # noqa: F401  (re-export sanity)
from mpmrom.manifold.encoder import conv_out_len, encoder_backward
from mpmrom.manifold.mlp import DenseLayer


def make_decoder(rng, d=2, r=3, width=14, hidden=2, scaled=True):
    scaling = None
    if scaled:
        x_min = rng.uniform(-0.5, 0.0, d)
        x_max = x_min + rng.uniform(0.8, 1.6, d)
        scaling = ScalingSpec(x_min, x_max, rng.normal(0.0, 0.2, d), rng.uniform(0.5, 1.5, d))
    return default_decoder(d, r, rng, scaling=scaling, width=width, hidden=hidden)


def make_corrections(rng, dec, with_velocity=False):
    x_hat0 = rng.normal(0.0, 0.4, dec.latent_dim)
    if not with_velocity:
        return CorrectionFields(x_hat0, np.zeros(dec.latent_dim))
    v_hat0 = rng.normal(0.0, 0.5, dec.latent_dim)
    c = rng.normal(0.0, 1.0, dec.dim)
    A = rng.normal(0.0, 0.3, (dec.dim, dec.dim))
    vbar = lambda X: c + X @ A.T
    vbar_jac = lambda X: np.broadcast_to(A, (len(X), dec.dim, dec.dim)).copy()
    return CorrectionFields(x_hat0, v_hat0, vbar=vbar, vbar_jacobian=vbar_jac)


def sample_ref(rng, scaling, n):
    return rng.uniform(scaling.x_min, scaling.x_max, (n, len(scaling.x_min)))


class TestDecodeCorrections:
    @pytest.mark.parametrize("d", [2, 3])
    @pytest.mark.parametrize("with_velocity", [False, True])
    def test_initial_state_reproduced_exactly(self, rng, d, with_velocity):
        dec = make_decoder(rng, d=d)
        corr = make_corrections(rng, dec, with_velocity=with_velocity)
        X = sample_ref(rng, dec.scaling, 40)
        pos = decode(dec, corr, X, corr.x_hat0, 0.0)
        assert np.allclose(pos, X, rtol=0.0, atol=1e-12)
        F = deformation_gradient(dec, corr, X, corr.x_hat0, 0.0)
        assert np.allclose(F, np.eye(d), rtol=0.0, atol=1e-12)

    def test_initial_velocity_matches_prescribed_field(self, rng):
        dec = make_decoder(rng, d=2)
        corr = make_corrections(rng, dec, with_velocity=True)
        X = sample_ref(rng, dec.scaling, 25)
        v = manifold_velocity(dec, corr, X, corr.x_hat0, corr.v_hat0, 0.0)
        assert np.allclose(v, corr.vbar(X), rtol=0.0, atol=1e-12)

    def test_single_point_matches_batch(self, rng):
        dec = make_decoder(rng, d=3)
        corr = make_corrections(rng, dec, with_velocity=True)
        xh = rng.normal(0.0, 0.3, dec.latent_dim)
        vh = rng.normal(size=dec.latent_dim)
        X = sample_ref(rng, dec.scaling, 5)
        # batched GEMMs may round differently than single-row ones
        tight = dict(rtol=0.0, atol=1e-12)
        batch = decode(dec, corr, X, xh, 0.7)
        for i, Xi in enumerate(X):
            assert np.allclose(decode(dec, corr, Xi, xh, 0.7), batch[i], **tight)
        assert np.allclose(deformation_gradient(dec, corr, X[2], xh, 0.7), deformation_gradient(dec, corr, X, xh, 0.7)[2], **tight)
        assert np.allclose(latent_jacobian(dec, X[1], xh), latent_jacobian(dec, X, xh)[1], **tight)
        assert np.allclose(manifold_velocity(dec, corr, X[0], xh, vh, 0.7), manifold_velocity(dec, corr, X, xh, vh, 0.7)[0], **tight)

    def test_decode_with_gradient_matches_separate_calls(self, rng):
        dec = make_decoder(rng, d=2)
        corr = make_corrections(rng, dec, with_velocity=True)
        xh = rng.normal(0.0, 0.3, dec.latent_dim)
        X = sample_ref(rng, dec.scaling, 12)
        pos, F = decode_with_gradient(dec, corr, X, xh, 0.4)
        assert np.allclose(pos, decode(dec, corr, X, xh, 0.4), atol=1e-14)
        assert np.allclose(F, deformation_gradient(dec, corr, X, xh, 0.4), atol=1e-14)


class TestDerivativesAgainstFiniteDifferences:
    @pytest.mark.parametrize("d", [2, 3])
    @pytest.mark.parametrize("with_velocity", [False, True])
    def test_deformation_gradient(self, rng, d, with_velocity):
        dec = make_decoder(rng, d=d)
        corr = make_corrections(rng, dec, with_velocity=with_velocity)
        xh = rng.normal(0.0, 0.4, dec.latent_dim)
        X = sample_ref(rng, dec.scaling, 30)
        t = 0.6
        F = deformation_gradient(dec, corr, X, xh, t)
        h = 1e-6
        F_fd = np.zeros_like(F)
        for j in range(d):
            dX = np.zeros(d)
            dX[j] = h
            F_fd[:, :, j] = (decode(dec, corr, X + dX, xh, t) - decode(dec, corr, X - dX, xh, t)) / (2 * h)
        assert np.max(np.abs(F - F_fd)) / max(np.max(np.abs(F)), 1.0) < 1e-5

    def test_latent_jacobian(self, rng):
        dec = make_decoder(rng, d=2, r=4)
        xh = rng.normal(0.0, 0.4, 4)
        X = sample_ref(rng, dec.scaling, 20)
        J = latent_jacobian(dec, X, xh)
        corr = CorrectionFields(rng.normal(size=4), np.zeros(4))
        h = 1e-6
        for k in range(4):
            e = np.zeros(4)
            e[k] = h
            col = (decode(dec, corr, X, xh + e, 0.0) - decode(dec, corr, X, xh - e, 0.0)) / (2 * h)
            assert np.max(np.abs(J[:, :, k] - col)) < 1e-5

    def test_velocity_is_latent_jacobian_contraction(self, rng):
        dec = make_decoder(rng, d=2, r=3)
        corr = make_corrections(rng, dec, with_velocity=True)
        xh = rng.normal(size=3)
        vh = rng.normal(size=3)
        X = sample_ref(rng, dec.scaling, 15)
        v = manifold_velocity(dec, corr, X, xh, vh, 0.9)
        expect = np.einsum("nij,j->ni", latent_jacobian(dec, X, xh), vh) + corr.b_field(dec, X) * corr.f_rate(0.9)
        assert np.allclose(v, expect, atol=1e-12)

    def test_time_warp_rate_matches_decode_fd(self, rng):
        dec = make_decoder(rng, d=2)
        corr = make_corrections(rng, dec, with_velocity=True)
        corr.time_warp = np.sin
        corr.time_warp_rate = np.cos
        xh = rng.normal(size=dec.latent_dim)
        X = sample_ref(rng, dec.scaling, 10)
        t, h = 0.8, 1e-6
        rate_fd = (decode(dec, corr, X, xh, t + h) - decode(dec, corr, X, xh, t - h)) / (2 * h)
        v = manifold_velocity(dec, corr, X, xh, np.zeros(dec.latent_dim), t)
        assert np.max(np.abs(v - rate_fd)) < 1e-5

    def test_b_spatial_jacobian_fd(self, rng):
        dec = make_decoder(rng, d=2)
        corr = make_corrections(rng, dec, with_velocity=True)
        X = sample_ref(rng, dec.scaling, 18)
        Jb = corr.b_spatial_jacobian(dec, X)
        h = 1e-6
        for j in range(2):
            dX = np.zeros(2)
            dX[j] = h
            col = (corr.b_field(dec, X + dX) - corr.b_field(dec, X - dX)) / (2 * h)
            assert np.max(np.abs(Jb[:, :, j] - col)) < 1e-5


class TestInversion:
    def test_round_trip_recovers_reference_points(self, rng):
        dec = make_decoder(rng, d=2)
        corr = make_corrections(rng, dec)
        xh = corr.x_hat0 + rng.normal(0.0, 0.15, dec.latent_dim)
        X = sample_ref(rng, dec.scaling, 60)
        targets = decode(dec, corr, X, xh, 0.3)
        Xr, ok, _ = invert_map_batch(dec, corr, targets, xh, 0.3, guess=X + rng.normal(0.0, 0.01, X.shape))
        assert ok.all()
        assert np.max(np.linalg.norm(Xr - X, axis=1)) < 1e-8

    def test_affine_map_inverts_in_one_step(self, rng):
        # identity-latent layer: net(X, xh) = X + B xh is affine in X
        d, r = 2, 2
        W = np.zeros((d, d + r))
        W[:, :d] = np.eye(d)
        B = rng.normal(0.0, 0.3, (d, r))
        W[:, d:] = B
        dec = DecoderNetwork([DenseLayer(W, np.zeros(d), "identity")], d, r, ScalingSpec.identity(d))
        corr = CorrectionFields(np.zeros(r), np.zeros(r))
        xh = rng.normal(size=r)
        X = rng.uniform(0.0, 1.0, (8, d))
        targets = decode(dec, corr, X, xh, 0.0)
        Xr, ok, _ = invert_map_batch(dec, corr, targets, xh, 0.0, max_iter=2)
        assert ok.all()
        assert np.max(np.abs(Xr - X)) < 1e-12

    def test_single_point_wrapper_and_stall(self, rng):
        dec = make_decoder(rng, d=2)
        corr = make_corrections(rng, dec)
        xh = corr.x_hat0 + rng.normal(0.0, 0.4, dec.latent_dim)
        X = sample_ref(rng, dec.scaling, 1)[0]
        target = decode(dec, corr, X, xh, 0.0)
        got = invert_map(dec, corr, target, xh, 0.0, guess=X + 0.05)
        assert np.linalg.norm(got - X) < 1e-9
        # a single Newton step from a poor guess cannot reach 1e-11 on a
        # nonlinear map, so the wrapper must report the stall
        with pytest.raises(NonConvergenceError):
            invert_map(dec, corr, target, xh, 0.0, guess=X + 0.3, max_iter=1)

    def test_degenerate_jacobian_is_reported(self):
        # one ELU unit whose pre-activation the latent drives deep negative:
        # its slope vanishes there, collapsing one column of the gradient
        l1 = DenseLayer(np.array([[1.0, 0.0, 5.0], [0.0, 1.0, 0.0]]), np.zeros(2), "elu")
        l2 = DenseLayer(np.eye(2), np.zeros(2), "identity")
        dec = DecoderNetwork([l1, l2], 2, 1, ScalingSpec.identity(2))
        corr = CorrectionFields(np.zeros(1), np.zeros(1))
        X = np.array([0.5, 0.5])
        assert np.allclose(decode(dec, corr, X, np.zeros(1), 0.0), X)
        from mpmrom.errors import DegenerateMapError

        with pytest.raises(DegenerateMapError):
            invert_map(dec, corr, X, np.array([-12.0]), 0.0, guess=X)

    def test_reference_box_discard(self, rng):
        dec = make_decoder(rng, d=2)
        corr = make_corrections(rng, dec)
        xh = corr.x_hat0
        lo, hi = dec.scaling.x_min, dec.scaling.x_max
        inside = decode(dec, corr, sample_ref(rng, dec.scaling, 5), xh, 0.0)
        far = inside + 100.0 * (hi - lo)
        X, ok, status = invert_map_batch(dec, corr, np.vstack([inside, far]), xh, 0.0, ref_lo=lo, ref_hi=hi)
        assert ok[:5].all()
        assert not ok[5:].any()
        from mpmrom.manifold.invert import LEFT_DOMAIN

        assert (status[5:] == LEFT_DOMAIN).all()


class TestEncoder:
    def test_architecture_depth_from_signal_length(self, rng):
        enc = build_encoder(400, 6, rng)
        lengths = [400]
        while conv_out_len(lengths[-1]) >= 32:
            lengths.append(conv_out_len(lengths[-1]))
        assert len(enc.conv_layers) == len(lengths) - 1
        assert enc.fc_layers[0].n_in == lengths[-1]
        assert enc.fc_layers[0].n_out == 32
        assert enc.fc_layers[1].n_out == 6
        # short signals skip the conv stack entirely
        assert build_encoder(40, 3, rng).conv_layers == []

    def test_encode_single_matches_stack(self, rng):
        dec = make_decoder(rng, d=2)
        enc = build_encoder(50 * 2, 3, rng)
        snaps = rng.uniform(dec.scaling.x_min, dec.scaling.x_max, (4, 50, 2))
        latents = encode(enc, dec, snaps)
        assert latents.shape == (4, 3)
        for i in range(4):
            assert np.allclose(encode(enc, dec, snaps[i]), latents[i], rtol=0.0, atol=1e-12)

    def test_backward_matches_finite_differences(self, rng):
        enc = build_encoder(76, 2, rng)  # one conv layer: (76-6)//2+1 = 36
        assert len(enc.conv_layers) == 1
        flat = rng.normal(0.0, 0.7, (3, 76))
        w_loss = rng.normal(size=(3, 2))

        def loss(e):
            return float(np.sum(encoder_forward(e, flat) * w_loss))

        y, tape = encoder_forward(enc, flat, need_tape=True)
        grads, gin = encoder_backward(enc, tape, w_loss)
        params = enc.parameters()
        assert len(grads) == len(params)
        h = 1e-6
        for p, g in zip(params, grads):
            assert p.shape == g.shape
            it = np.nditer(p, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                keep = p[idx]
                p[idx] = keep + h
                up = loss(enc)
                p[idx] = keep - h
                dn = loss(enc)
                p[idx] = keep
                fd = (up - dn) / (2 * h)
                assert abs(fd - g[idx]) < 1e-4 * max(1.0, abs(g[idx]))
        for n in range(3):
            for j in rng.choice(76, size=10, replace=False):
                keep = flat[n, j]
                flat[n, j] = keep + h
                up = loss(enc)
                flat[n, j] = keep - h
                dn = loss(enc)
                flat[n, j] = keep
                fd = (up - dn) / (2 * h)
                assert abs(fd - gin[n, j]) < 1e-4 * max(1.0, abs(gin[n, j]))

    def test_flatten_uses_decoder_scaling(self, rng):
        dec = make_decoder(rng, d=2)
        pos = rng.uniform(dec.scaling.x_min, dec.scaling.x_max, (3, 7, 2))
        flat = flatten_snapshots(dec, pos)
        assert flat.shape == (3, 14)
        assert np.allclose(flat[1, 4:6], dec.scaling.scale_in(pos[1, 2]))
        assert flat.min() >= 0.0 and flat.max() <= 1.0


class TestAnchorFit:
    def test_recovers_planted_latent(self, rng):
        # net(X, xh) = X + B (xh - xh*): anchor fit must find xh*
        d, r = 2, 3
        xh_star = rng.normal(0.0, 0.5, r)
        B = rng.normal(0.0, 0.4, (d, r))
        W = np.hstack([np.eye(d), B])
        dec = DecoderNetwork([DenseLayer(W, -B @ xh_star, "identity")], d, r, ScalingSpec.identity(d))
        X = rng.uniform(0.0, 1.0, (30, d))
        res = fit_anchor_latent(dec, X)
        assert res.converged
        # B has a null space (r > d): compare through the map, not the latent
        assert np.max(np.abs(B @ (res.x - xh_star))) < 1e-8

    def test_initial_fit_builds_consistent_corrections(self, rng):
        dec = make_decoder(rng, d=2, r=3, width=10, hidden=2)
        X = sample_ref(rng, dec.scaling, 40)
        c = np.array([0.3, -0.2])
        corr = initial_latent_fit(
            dec,
            X,
            vbar=lambda P: np.broadcast_to(c, (len(P), 2)).copy(),
            vbar_jacobian=lambda P: np.zeros((len(P), 2, 2)),
        )
        assert np.allclose(decode(dec, corr, X, corr.x_hat0, 0.0), X, atol=1e-12)
        v0 = manifold_velocity(dec, corr, X, corr.x_hat0, corr.v_hat0, 0.0)
        assert np.allclose(v0, np.broadcast_to(c, v0.shape), atol=1e-12)

    def test_zero_velocity_shortcut(self, rng):
        dec = make_decoder(rng, d=2)
        X = sample_ref(rng, dec.scaling, 25)
        corr = initial_latent_fit(dec, X)
        assert not np.any(corr.v_hat0)
        assert corr.b_is_zero


class TestModelFiles:
    def make_bundle(self, rng):
        from mpmrom.manifold import ModelBundle

        dec = make_decoder(rng, d=2, r=3)
        enc = build_encoder(120 * 2, 3, rng)
        corr = CorrectionFields(rng.normal(size=3), rng.normal(size=3))
        return ModelBundle(dec, enc, corr, 120, 0.5, 0.01, {"note": "round trip"})

    def test_round_trip_is_bit_exact(self, rng, tmp_path):
        from mpmrom.manifold import load_model, save_model

        bundle = self.make_bundle(rng)
        path = tmp_path / "model.json"
        save_model(path, bundle)
        back = load_model(path)
        assert back.particle_count == 120
        assert back.lambda_f == 0.5 and back.lambda_v == 0.01
        assert back.metadata == {"note": "round trip"}
        for a, b in zip(bundle.decoder.layers, back.decoder.layers):
            assert np.array_equal(a.weight, b.weight)
            assert np.array_equal(a.bias, b.bias)
            assert a.activation == b.activation
        for a, b in zip(bundle.encoder.conv_layers, back.encoder.conv_layers):
            assert np.array_equal(a.weight, b.weight) and a.stride == b.stride
        for a, b in zip(bundle.encoder.fc_layers, back.encoder.fc_layers):
            assert np.array_equal(a.weight, b.weight)
        assert np.array_equal(bundle.corrections.x_hat0, back.corrections.x_hat0)
        assert np.array_equal(bundle.corrections.v_hat0, back.corrections.v_hat0)
        for f in ("x_min", "x_max", "out_mean", "out_std"):
            assert np.array_equal(getattr(bundle.decoder.scaling, f), getattr(back.decoder.scaling, f))
        # same latents from the restored pair
        snaps = rng.uniform(bundle.decoder.scaling.x_min, bundle.decoder.scaling.x_max, (2, 120, 2))
        assert np.array_equal(encode(bundle.encoder, bundle.decoder, snaps), encode(back.encoder, back.decoder, snaps))

    def test_awkward_floats_survive(self, rng, tmp_path):
        from mpmrom.manifold import load_model, save_model

        bundle = self.make_bundle(rng)
        w = bundle.decoder.layers[0].weight
        w[0, 0] = np.nextafter(1.0, 2.0)
        w[0, 1] = 1e-308
        w[1, 0] = np.pi * 1e17
        save_model(tmp_path / "m.json", bundle)
        back = load_model(tmp_path / "m.json")
        assert np.array_equal(back.decoder.layers[0].weight, w)

    def test_rejects_garbage(self, rng, tmp_path):
        from mpmrom.errors import FormatError
        from mpmrom.manifold import load_model, save_model

        p = tmp_path / "bad.json"
        p.write_text("not json at all {", encoding="utf-8")
        with pytest.raises(FormatError):
            load_model(p)
        p.write_text('{"format": "OTHER"}', encoding="utf-8")
        with pytest.raises(FormatError):
            load_model(p)
        bundle = self.make_bundle(rng)
        save_model(tmp_path / "ok.json", bundle)
        import json

        doc = json.loads((tmp_path / "ok.json").read_text())
        del doc["decoder"]["layers"][0]["bias"]
        (tmp_path / "mangled.json").write_text(json.dumps(doc))
        with pytest.raises(FormatError):
            load_model(tmp_path / "mangled.json")

    def test_unserializable_velocity_field_is_refused(self, rng, tmp_path):
        from mpmrom.errors import ConfigError
        from mpmrom.manifold import save_model

        bundle = self.make_bundle(rng)
        bundle.corrections.vbar = lambda X: X
        with pytest.raises(ConfigError):
            save_model(tmp_path / "no.json", bundle)

import math

import numpy as np
import pytest

from knocksim import mixture
from knocksim.core import (
    Dataset,
    KnockRecord,
    Normalizer,
    OperatingPoint,
    fit_normalizer,
)
from knocksim.mdn import (
    LossHistory,
    MdnModel,
    TrainingConfig,
    forward,
    forward_raw,
    gradient,
    nll,
    predict_cdf,
    train,
)
from knocksim.rng import RandomStream

IDENTITY = Normalizer(
    input_mean=np.zeros(3),
    input_std=np.ones(3),
    output_mean=0.0,
    output_std=1.0,
)


def random_model(rng, hidden=(4,), m=2, normalizer=IDENTITY, scale=0.8):
    sizes = [3, *hidden, 3 * m]
    ws, bs = [], []
    for a, b in zip(sizes[:-1], sizes[1:]):
        ws.append((rng.uniform(a * b).reshape(b, a) - 0.5) * scale)
        bs.append((rng.uniform(b) - 0.5) * scale)
    return MdnModel(
        weights=tuple(ws),
        biases=tuple(bs),
        kernel_count=m,
        sigma_floor=1e-6,
        normalizer=normalizer,
    )


def gaussian_dataset(mean=3.0, std=2.0, n=4000, seed=0):
    op = OperatingPoint(1200.0, 6.0, 0.0)
    y = RandomStream(seed, 0).normal(n) * std + mean
    return Dataset([op], {0: [KnockRecord(op, 0, y)]})


class TestForward:
    def test_head_invariants_fuzzed(self):
        rng = RandomStream(0, 0)
        checked = 0
        for trial in range(100):
            m = int(rng.uniform(1)[0] * 4) + 1
            model = random_model(rng, hidden=(5, 3), m=m, scale=3.0)
            for _ in range(10):
                u = OperatingPoint(*(rng.uniform(3) * [2000.0, 8.0, 6.0] + [200.0, 0.5, -4.0]))
                p = forward(model, u)
                assert abs(p.weights.sum() - 1.0) <= 1e-9
                assert np.all(p.weights > 0.0)
                assert np.all(p.sigmas >= model.sigma_floor * model.normalizer.output_std)
                checked += 1
        assert checked == 1000

    def test_zero_network_hand_computed(self):
        m = 3
        b_head = np.array([0.0, 0.0, 0.0, -1.0, 0.5, 2.0, math.log(0.5), 0.0, 1.0])
        nz = Normalizer(
            input_mean=np.array([1200.0, 6.0, 0.0]),
            input_std=np.array([300.0, 2.0, 1.5]),
            output_mean=1.0,
            output_std=2.0,
        )
        model = MdnModel(
            weights=(np.zeros((4, 3)), np.zeros((3 * m, 4))),
            biases=(np.zeros(4), b_head),
            kernel_count=m,
            sigma_floor=1e-6,
            normalizer=nz,
        )
        p = forward(model, OperatingPoint(900.0, 4.0, 1.0))
        np.testing.assert_allclose(p.weights, [1 / 3] * 3, rtol=1e-15)
        np.testing.assert_allclose(p.means, np.array([-1.0, 0.5, 2.0]) * 2.0 + 1.0, rtol=1e-15)
        want_sig = (np.exp([math.log(0.5), 0.0, 1.0]) + 1e-6) * 2.0
        np.testing.assert_allclose(p.sigmas, want_sig, rtol=1e-15)

    def test_continuity(self):
        model = random_model(RandomStream(1, 0), hidden=(6,), m=2)
        for seed in range(3):
            base = RandomStream(seed, 2).uniform(3) * [1000.0, 4.0, 4.0] + [500.0, 2.0, -2.0]
            u0 = OperatingPoint(*base)
            p0 = forward(model, u0)
            gaps = []
            for h in (1e-2, 1e-4, 1e-6):
                u1 = OperatingPoint(base[0] + h, base[1] + h, base[2] + h)
                p1 = forward(model, u1)
                gaps.append(
                    max(
                        np.abs(p1.weights - p0.weights).max(),
                        np.abs(p1.means - p0.means).max(),
                        np.abs(p1.sigmas - p0.sigmas).max(),
                    )
                )
            assert gaps[0] > gaps[1] > gaps[2]
            assert gaps[2] < 1e-5

    def test_nonfinite_input_rejected(self):
        model = random_model(RandomStream(2, 0))
        with pytest.raises(ValueError):
            forward_raw(model, np.array([[np.nan, 6.0, 0.0]]))


class TestNll:
    def test_duplicated_batch_invariance(self):
        model = random_model(RandomStream(3, 0))
        U = np.array([[1200.0, 6.0, 0.0]])
        y = np.array([0.8])
        one = nll(model, U, y)
        two = nll(model, np.vstack([U, U]), np.concatenate([y, y]))
        assert two == pytest.approx(one, rel=1e-14)

    def test_cross_check_against_mixture(self):
        model = random_model(RandomStream(4, 0), hidden=(5, 4), m=3)
        rng = RandomStream(5, 0)
        U = rng.uniform(30).reshape(10, 3) * [1500.0, 6.0, 6.0] + [400.0, 1.0, -4.0]
        y = rng.normal(10) + 1.0
        want = -np.mean([mixture.log_pdf(forward(model, OperatingPoint(*u)), yv) for u, yv in zip(U, y)])
        assert nll(model, U, y) == pytest.approx(want, abs=1e-10)

    def test_trained_gaussian_entropy(self):
        data = gaussian_dataset(mean=3.0, std=2.0, n=4000)
        cfg = TrainingConfig(kernel_count=1, hidden_sizes=(8,), epochs=120, batch_size=256, seed=0)
        model, _ = train(data, cfg)
        U, y = data.pairs()
        entropy = 0.5 * math.log(2.0 * math.pi * math.e * 4.0)
        assert nll(model, U, y) == pytest.approx(entropy, abs=0.05)

    def test_empty_batch_error(self):
        model = random_model(RandomStream(6, 0))
        with pytest.raises(ValueError):
            nll(model, np.empty((0, 3)), np.empty(0))


class TestGradient:
    def test_finite_difference_small_model(self):
        rng = RandomStream(7, 0)
        model = random_model(rng, hidden=(2,), m=2)
        U = rng.uniform(24).reshape(8, 3) * [1500.0, 6.0, 6.0] + [400.0, 1.0, -4.0]
        y = rng.normal(8) * 0.5 + 1.0
        g = gradient(model, U, y)
        fd = finite_difference(model, U, y, eps=1e-6)
        rel = np.abs(g - fd) / max(np.abs(fd).max(), 1e-12)
        assert rel.max() < 1e-4

    def test_duplicated_batch_invariance(self):
        model = random_model(RandomStream(8, 0))
        U = np.array([[900.0, 4.0, -1.0], [1600.0, 7.0, 2.0]])
        y = np.array([0.4, 1.9])
        g1 = gradient(model, U, y)
        g2 = gradient(model, np.vstack([U, U]), np.concatenate([y, y]))
        np.testing.assert_allclose(g2, g1, rtol=1e-12, atol=1e-15)

    def test_constructed_stationary_point(self):
        # m=1 closed-form optimum: standardized data is N(0,1), so the head
        # must emit mu=0, sigma=1; zero hidden weights make the rest flat
        data = gaussian_dataset(mean=-1.0, std=0.7, n=2000, seed=9)
        nz = fit_normalizer(data)
        floor = 1e-6
        b_head = np.array([0.0, 0.0, math.log(1.0 - floor)])
        model = MdnModel(
            weights=(np.zeros((4, 3)), np.zeros((3, 4))),
            biases=(np.zeros(4), b_head),
            kernel_count=1,
            sigma_floor=floor,
            normalizer=nz,
        )
        U, y = data.pairs()
        assert np.linalg.norm(gradient(model, U, y)) < 1e-6

    def test_length_of_flat_gradient(self):
        model = random_model(RandomStream(10, 0), hidden=(5, 4), m=3)
        U = np.array([[1200.0, 6.0, 0.0]])
        y = np.array([1.0])
        g = gradient(model, U, y)
        assert g.shape == model.flat_parameters().shape


def finite_difference(model, U, y, eps):
    flat = model.flat_parameters()
    out = np.empty_like(flat)

    def rebuild(vec):
        ws, bs, at = [], [], 0
        for w in model.weights:
            ws.append(vec[at : at + w.size].reshape(w.shape))
            at += w.size
            bs.append(vec[at : at + w.shape[0]])
            at += w.shape[0]
        return MdnModel(
            weights=tuple(ws),
            biases=tuple(bs),
            kernel_count=model.kernel_count,
            sigma_floor=model.sigma_floor,
            normalizer=model.normalizer,
        )

    for i in range(flat.size):
        hi, lo = flat.copy(), flat.copy()
        hi[i] += eps
        lo[i] -= eps
        out[i] = (nll(rebuild(hi), U, y) - nll(rebuild(lo), U, y)) / (2 * eps)
    return out


class TestTrain:
    def test_zero_epochs_returns_init(self):
        data = gaussian_dataset(n=600)
        cfg = TrainingConfig(kernel_count=2, hidden_sizes=(4,), epochs=0, seed=3)
        model, hist = train(data, cfg)
        assert len(hist) == 0
        same, _ = train(data, cfg)
        np.testing.assert_array_equal(model.flat_parameters(), same.flat_parameters())

    def test_same_seed_bit_identical(self):
        data = gaussian_dataset(n=900)
        cfg = TrainingConfig(kernel_count=2, hidden_sizes=(6,), epochs=5, batch_size=128, seed=11)
        m1, h1 = train(data, cfg)
        m2, h2 = train(data, cfg)
        np.testing.assert_array_equal(m1.flat_parameters(), m2.flat_parameters())
        np.testing.assert_array_equal(h1.train_nll, h2.train_nll)

    def test_different_seed_differs(self):
        data = gaussian_dataset(n=600)
        a, _ = train(data, TrainingConfig(kernel_count=1, hidden_sizes=(4,), epochs=2, seed=0))
        b, _ = train(data, TrainingConfig(kernel_count=1, hidden_sizes=(4,), epochs=2, seed=1))
        assert not np.array_equal(a.flat_parameters(), b.flat_parameters())

    def test_loss_decreases(self):
        data = gaussian_dataset(n=2500)
        cfg = TrainingConfig(kernel_count=2, hidden_sizes=(8,), epochs=40, seed=0)
        _, hist = train(data, cfg)
        assert len(hist) == 40
        assert hist.train_nll[-1] < hist.train_nll[0]

    def test_history_length_matches_epochs(self):
        data = gaussian_dataset(n=300)
        _, hist = train(data, TrainingConfig(kernel_count=1, hidden_sizes=(4,), epochs=7, seed=0))
        assert len(hist) == 7
        assert isinstance(hist, LossHistory)

    def test_empty_data_error(self):
        cfg = TrainingConfig(kernel_count=1, hidden_sizes=(4,), epochs=1)
        with pytest.raises(ValueError):
            train(Dataset([], {}), cfg)

    def test_beats_single_gaussian_baseline_on_bimodal(self):
        # two far modes: one Gaussian is badly misspecified, m=2 is not;
        # two conditions so standardized inputs vary and break the
        # component symmetry of the initial head
        ops = [OperatingPoint(1000.0, 6.0, 0.0), OperatingPoint(1400.0, 6.0, 0.0)]
        truth = mixture.MixtureParams([0.5, 0.5], [0.0, 4.0], [0.4, 0.4])
        recs = {
            i: [KnockRecord(op, 0, mixture.sample_ancestral(truth, RandomStream(13, i), 1500))]
            for i, op in enumerate(ops)
        }
        data = Dataset(ops, recs)
        cfg = TrainingConfig(kernel_count=2, hidden_sizes=(8,), epochs=120, seed=0)
        model, _ = train(data, cfg)
        U, yv = data.pairs()
        gauss_nll = 0.5 * math.log(2.0 * math.pi * math.e * yv.std() ** 2)
        assert nll(model, U, yv) < gauss_nll - 0.2


class TestAffineEquivariance:
    def test_head_destandardization_is_affine(self):
        # fixed raw network outputs + affinely shifted normalizer stats
        # give exactly affinely shifted densities
        rng = RandomStream(14, 0)
        a_mu = rng.uniform(2) * 2.0 - 1.0
        a_sg = rng.uniform(2) - 0.5
        a_w = rng.uniform(2)
        b_head = np.concatenate([a_w, a_mu, a_sg])
        scale, shift = 2.5, -0.7

        def model_for(out_mean, out_std):
            nz = Normalizer(
                input_mean=np.zeros(3),
                input_std=np.ones(3),
                output_mean=out_mean,
                output_std=out_std,
            )
            return MdnModel(
                weights=(np.zeros((4, 3)), np.zeros((6, 4))),
                biases=(np.zeros(4), b_head),
                kernel_count=2,
                sigma_floor=1e-6,
                normalizer=nz,
            )

        base = forward(model_for(1.0, 2.0), OperatingPoint(1200.0, 6.0, 0.0))
        moved = forward(model_for(1.0 * scale + shift, 2.0 * scale), OperatingPoint(1200.0, 6.0, 0.0))
        np.testing.assert_allclose(moved.weights, base.weights, rtol=1e-14)
        np.testing.assert_allclose(moved.means, base.means * scale + shift, rtol=1e-12)
        np.testing.assert_allclose(moved.sigmas, base.sigmas * scale, rtol=1e-12)
        # density transforms as p'(a*y+b) = p(y)/a
        y = np.linspace(-3.0, 6.0, 9)
        np.testing.assert_allclose(
            mixture.pdf(moved, y * scale + shift),
            mixture.pdf(base, y) / scale,
            rtol=1e-10,
        )


class TestPredictCdf:
    def test_monotone(self):
        model = random_model(RandomStream(15, 0), hidden=(6,), m=3)
        grid = np.linspace(-5.0, 8.0, 300)
        vals = predict_cdf(model, OperatingPoint(1100.0, 5.0, 1.0), grid)
        assert np.all(np.diff(vals) >= 0.0)
        assert np.all((vals >= 0.0) & (vals <= 1.0))

    def test_center_of_symmetric_model(self):
        data = gaussian_dataset(mean=3.0, std=2.0, n=3000)
        cfg = TrainingConfig(kernel_count=1, hidden_sizes=(6,), epochs=60, seed=0)
        model, _ = train(data, cfg)
        p = forward(model, OperatingPoint(1200.0, 6.0, 0.0))
        got = predict_cdf(model, OperatingPoint(1200.0, 6.0, 0.0), np.array([p.means[0]]))
        assert got[0] == pytest.approx(0.5, abs=1e-9)

    def test_matches_pdf_quadrature(self):
        model = random_model(RandomStream(16, 0), hidden=(5,), m=2)
        u = OperatingPoint(1300.0, 6.5, -1.0)
        p = forward(model, u)
        lo = p.means.min() - 12.0 * p.sigmas.max()
        grid = np.linspace(lo, p.means.max() + 3.0 * p.sigmas.max(), 20_001)
        dens = mixture.pdf(p, grid)
        h = grid[1] - grid[0]
        simpson = np.concatenate(
            [[0.0], np.cumsum(h / 3.0 * (dens[0:-2:2] + 4.0 * dens[1:-1:2] + dens[2::2]))]
        )
        got = predict_cdf(model, u, grid[::2])
        np.testing.assert_allclose(got, simpson + mixture.cdf(p, lo), atol=1e-6)

    def test_unsorted_grid_error(self):
        model = random_model(RandomStream(17, 0))
        with pytest.raises(ValueError):
            predict_cdf(model, OperatingPoint(1200.0, 6.0, 0.0), np.array([1.0, 0.5]))


class TestTrainingConfigValidation:
    def test_bad_epochs(self):
        with pytest.raises(ValueError):
            TrainingConfig(kernel_count=1, epochs=-1)

    def test_bad_batch(self):
        with pytest.raises(ValueError):
            TrainingConfig(kernel_count=1, batch_size=0)

    def test_bad_lr(self):
        with pytest.raises(ValueError):
            TrainingConfig(kernel_count=1, learning_rate=0.0)

    def test_bad_kernel_count(self):
        with pytest.raises(ValueError):
            TrainingConfig(kernel_count=0)

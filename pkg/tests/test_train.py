import math

import numpy as np
import pytest

from gazepath import tensor as T
from gazepath.data import PaddedSample, SyntheticFeatures, blob_center, pad_scanpath, synthetic_dataset
from gazepath.model import FixationOutput, Model, ModelConfig, forward
from gazepath.structs import Scanpath
from gazepath.tensor import Tensor
from gazepath.train import (
    PROB_CLAMP, Adam, TrainConfig, Trainer, batch_indices, loss_val, loss_xyt, total_loss, write_loss_csv,
)


def padded(xs, ys, ts, l):
    L = len(xs)
    valid = (np.arange(L) < l).astype(float)
    return PaddedSample(np.array(xs, float), np.array(ys, float), np.array(ts, float), valid, l)


# ---------------------------------------------------------------- loss_xyt

def test_loss_xyt_zero_when_equal():
    gt = padded([0.1, 0.2, 0.0], [0.3, 0.4, 0.0], [0.05, 0.06, 0.0], 2)
    assert float(loss_xyt((gt.xs, gt.ys, gt.ts), gt).data) == 0.0


def test_loss_xyt_hand_example():
    gt = padded([0.5, 0.0], [0.5, 0.0], [0.5, 0.0], 1)
    pred = (np.array([0.6, 9.0]), np.array([0.3, 9.0]), np.array([0.8, 9.0]))
    assert float(loss_xyt(pred, gt).data) == pytest.approx(0.6, abs=1e-12)


def test_loss_xyt_without_duration_term():
    gt = padded([0.5], [0.5], [0.5], 1)
    assert float(loss_xyt((np.array([0.6]), np.array([0.3]), None), gt).data) == pytest.approx(0.3, abs=1e-12)


def test_loss_xyt_empty_gt_is_error():
    gt = padded([0.5, 0.5], [0.5, 0.5], [0.5, 0.5], 0)
    with pytest.raises(ValueError, match="non-empty"):
        loss_xyt((gt.xs, gt.ys, gt.ts), gt)


def test_loss_xyt_masking_bit_exact():
    rng = np.random.default_rng(0)
    L = 7
    for l in range(1, L + 1):
        pred = tuple(rng.uniform(size=L) for _ in range(3))
        base = padded(*(rng.uniform(size=L) for _ in range(3)), l)
        ref = float(loss_xyt(pred, base).data)
        for trial in range(20):
            bad = padded(base.xs.copy(), base.ys.copy(), base.ts.copy(), l)
            for arr in (bad.xs, bad.ys, bad.ts):
                arr[l:] = rng.standard_normal(L - l) * 10.0 ** rng.integers(-3, 9)
            assert float(loss_xyt(pred, bad).data) == ref


# ---------------------------------------------------------------- loss_val

def test_loss_val_examples():
    assert float(loss_val(np.array([1.0, 1.0, 0.0]), [1, 1, 0]).data) < 1e-6
    assert float(loss_val(np.full(7, 0.5), [1, 1, 1, 0, 0, 0, 0]).data) == pytest.approx(math.log(2), abs=1e-12)
    wrong = float(loss_val(np.array([0.0, 1.0, 1.0, 1.0]), [1, 1, 1, 1]).data)
    assert wrong >= -math.log(PROB_CLAMP) / 4 - 1e-9


def test_losses_non_negative():
    rng = np.random.default_rng(1)
    for _ in range(50):
        gt = padded(*(rng.uniform(size=5) for _ in range(3)), int(rng.integers(1, 6)))
        assert float(loss_xyt(tuple(rng.uniform(size=5) for _ in range(3)), gt).data) >= 0
        assert float(loss_val(rng.uniform(size=5), gt.valid).data) >= 0


# ---------------------------------------------------------------- total_loss

def _random_output(rng, M, L, variant="full"):
    f = lambda: Tensor(rng.uniform(0.05, 0.95, size=(M, L)), requires_grad=True)  # noqa: E731
    lv = lambda: Tensor(rng.uniform(-3, 0, size=(M, L)), requires_grad=True)  # noqa: E731
    return FixationOutput(valid_prob=f(), mu_x=f(), mu_y=f(), mu_t=f(), lambda_x=lv(), lambda_y=lv(), lambda_t=lv())


def naive_total(out, samples, eps):
    """Plain-python summation of the batch loss."""
    M, L = out.valid_prob.shape
    acc = 0.0
    for j in range(M):
        p = samples[j]
        reg = 0.0
        for i in range(p.l):
            for c, (mu, lam, g) in enumerate([(out.mu_x, out.lambda_x, p.xs), (out.mu_y, out.lambda_y, p.ys),
                                              (out.mu_t, out.lambda_t, p.ts)]):
                val = mu.data[j, i] + eps[j, i, c] * math.exp(0.5 * lam.data[j, i])
                reg += abs(val - g[i])
        nll = 0.0
        for i in range(L):
            v = min(max(out.valid_prob.data[j, i], 1e-7), 1 - 1e-7)
            y = 1.0 if i < p.l else 0.0
            nll -= y * math.log(v) + (1 - y) * math.log(1 - v)
        acc += reg / p.l + nll / L
    return acc / M


def test_total_loss_matches_naive_oracle():
    rng = np.random.default_rng(2)
    cfg = ModelConfig.tiny()
    for _ in range(20):
        M = int(rng.integers(1, 6))
        out = _random_output(rng, M, cfg.L)
        samples = [padded(*(rng.uniform(size=cfg.L) for _ in range(3)), int(rng.integers(1, cfg.L + 1)))
                   for _ in range(M)]
        eps = rng.standard_normal((M, cfg.L, 3))
        got = float(total_loss(out, cfg, samples, eps).total.data)
        assert abs(got - naive_total(out, samples, eps)) < 1e-12


def test_total_loss_single_and_duplicated():
    rng = np.random.default_rng(3)
    cfg = ModelConfig.tiny()
    out1 = _random_output(rng, 1, cfg.L)
    s = padded(*(rng.uniform(size=cfg.L) for _ in range(3)), 4)
    eps = rng.standard_normal((1, cfg.L, 3))
    one = total_loss(out1, cfg, [s], eps)
    assert float(one.total.data) == pytest.approx(one.xyt + one.val, abs=1e-15)
    dup = lambda t: Tensor(np.repeat(t.data, 2, axis=0))  # noqa: E731
    out2 = FixationOutput(**{k: dup(getattr(out1, k)) for k in ("valid_prob", "mu_x", "mu_y", "mu_t",
                                                                 "lambda_x", "lambda_y", "lambda_t")})
    two = total_loss(out2, cfg, [s, s], np.repeat(eps, 2, axis=0))
    assert float(two.total.data) == float(one.total.data)


def test_total_loss_empty_batch():
    with pytest.raises(ValueError, match="empty batch"):
        total_loss(_random_output(np.random.default_rng(0), 1, 7), ModelConfig.tiny(), [], np.zeros((0, 7, 3)))


def test_total_loss_masking_through_model():
    cfg = ModelConfig.tiny()
    model = Model.create(cfg, 0, np.float64)
    rng = np.random.default_rng(4)
    raw = rng.standard_normal((1, cfg.C, cfg.h, cfg.w))
    tgt = rng.standard_normal((1, cfg.d_text))
    eps = rng.standard_normal((1, cfg.L, 3))
    out = forward(model.params, cfg, raw, tgt)
    for l in range(1, cfg.L + 1):
        s = padded(*(rng.uniform(size=cfg.L) for _ in range(3)), l)
        ref = float(total_loss(out, cfg, [s], eps).total.data)
        s.xs[l:] = 1e6
        s.ts[l:] = -3.0
        assert float(total_loss(out, cfg, [s], eps).total.data) == ref


# ---------------------------------------------------------------- Adam

def test_adam_zero_gradient_no_change():
    p = {"w": Tensor(np.array([1.0, -2.0]))}
    Adam(p).step(p, {"w": np.zeros(2)})
    assert p["w"].data.tolist() == [1.0, -2.0]


def test_adam_first_step_magnitude_is_lr():
    p = {"w": Tensor(np.zeros(4))}
    Adam(p, lr=1e-4).step(p, {"w": np.array([3.0, -0.5, 1e-2, 7.0])})
    np.testing.assert_allclose(p["w"].data, -1e-4 * np.sign([3.0, -0.5, 1e-2, 7.0]), rtol=1e-5)


def test_adam_shape_mismatch():
    p = {"w": Tensor(np.zeros(4))}
    with pytest.raises(ValueError, match="shape"):
        Adam(p).step(p, {"w": np.zeros(3)})


# ---------------------------------------------------------------- loop

def _trainer(steps=0, **kw):
    cfg = ModelConfig.tiny()
    ds = synthetic_dataset(cfg, n_images=8)
    return Trainer(ds, cfg, TrainConfig(batch_size=4, steps=steps, **kw), SyntheticFeatures(0))


def test_batch_indices_cover_each_epoch():
    seen = sum((batch_indices(10, 5, s, 3) for s in range(2)), [])
    assert sorted(seen) == list(range(10))
    assert batch_indices(10, 5, 0, 3) == batch_indices(10, 5, 0, 3)
    assert batch_indices(10, 5, 0, 3) != batch_indices(10, 5, 0, 4)


def test_initial_validity_loss_near_ln2():
    tr = _trainer()
    assert abs(tr.loss_at(0).val - math.log(2)) < 0.2


def test_two_runs_bit_identical():
    a, b = _trainer(), _trainer()
    a.run(5)
    b.run(5)
    assert a.history == b.history
    for k in a.model.params:
        assert a.model.params[k].data.tobytes() == b.model.params[k].data.tobytes()


def test_resume_gives_bit_identical_next_step(tmp_path):
    straight = _trainer()
    straight.run(6)
    first = _trainer()
    first.run(3)
    first.save(tmp_path / "c.gzc")
    resumed = Trainer.resume(tmp_path / "c.gzc", first.ds, SyntheticFeatures(0))
    resumed.run(3)
    assert resumed.history == straight.history[3:]
    for k in straight.model.params:
        assert resumed.model.params[k].data.tobytes() == straight.model.params[k].data.tobytes()


def test_empty_training_set():
    from gazepath.data import Dataset

    with pytest.raises(ValueError, match="empty"):
        Trainer(Dataset([]), ModelConfig.tiny(), TrainConfig(), SyntheticFeatures(0))


def test_loss_csv_format(tmp_path):
    write_loss_csv(tmp_path / "l.csv", [(0, 0.5, 0.25, 0.75), (1, 0.1, 0.2, 0.30000000000000004)])
    assert (tmp_path / "l.csv").read_text().splitlines() == [
        "step,loss_xyt,loss_val,total", "0,0.5,0.25,0.75", "1,0.1,0.2,0.30000000000000004"]


def test_noreg_and_nodur_train_steps():
    for variant in ("noReg", "noDur"):
        cfg = ModelConfig.tiny(variant=variant)
        ds = synthetic_dataset(cfg, n_images=4)
        tr = Trainer(ds, cfg, TrainConfig(batch_size=4), SyntheticFeatures(0))
        rows = [tr.train_step() for _ in range(3)]
        assert all(np.isfinite(r[3]) and r[3] >= 0 for r in rows)


@pytest.mark.slow
def test_training_moves_predictions_toward_blob():
    """Terminal fixation (which sits on the planted blob in this task) approaches
    the blob; distance averaged over 100-step windows decreases monotonically."""
    cfg = ModelConfig.tiny()
    ds = synthetic_dataset(cfg, n_images=8)
    tr = Trainer(ds, cfg, TrainConfig(batch_size=8), SyntheticFeatures(0))
    raw, tgt, init, pads = tr.batch(list(range(8)))
    blob = np.array([blob_center(s.image_id, s.target, cfg, 1, 1) for s in ds.samples])
    last = np.array([p.l - 1 for p in pads])
    rows = np.arange(8)

    def distance():
        with T.no_grad():
            o = forward(tr.model.params, cfg, raw, tgt, init)
        return float(np.mean(np.hypot(o.mu_x.data[rows, last] - blob[:, 0], o.mu_y.data[rows, last] - blob[:, 1])))

    samples = []
    tr.run(1000, lambda t, _: samples.append(distance()) if t.step % 10 == 0 else None)
    windows = np.array(samples).reshape(-1, 10).mean(axis=1)
    assert np.all(np.diff(windows) < 0), windows

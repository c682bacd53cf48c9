"""Loss agreement with the mrb quality oracles, and gradient checks."""

import numpy as np
import pytest
import torch

from mrb import quality

from mrb_trainer import (GradMismatch, charbonnier, combined_loss, gradcheck,
                         nig_loss, ssim_loss)


def _fixtures(seed=0, shape=(3, 8, 8)):
    rng = np.random.default_rng(seed)
    x = rng.random(shape)
    y = rng.random(shape)
    return x, y


def _vol(a):
    # channels-first (S, H, W) -> the quality module's (H, W, S)
    return np.transpose(a, (1, 2, 0))


class TestCrossComponentAgreement:
    def test_charbonnier(self):
        x, y = _fixtures(1)
        ours = float(charbonnier(torch.from_numpy(x), torch.from_numpy(y)))
        assert ours == pytest.approx(quality.charbonnier(_vol(x), _vol(y)),
                                     abs=1e-12)

    def test_ssim_loss(self):
        x, y = _fixtures(2)
        ours = float(ssim_loss(torch.from_numpy(x), torch.from_numpy(y)))
        assert ours == pytest.approx(quality.ssim_loss(_vol(x), _vol(y)),
                                     abs=1e-12)

    def test_nig_loss(self):
        rng = np.random.default_rng(3)
        y, g = rng.random((2, 4, 4)), rng.random((2, 4, 4))
        v = rng.random((2, 4, 4)) + 0.5
        a = rng.random((2, 4, 4)) + 1.5
        b = rng.random((2, 4, 4)) + 0.5
        nll, reg = nig_loss(*(torch.from_numpy(t) for t in (y, g, v, a, b)))
        ref_nll, ref_reg = quality.nig_loss(_vol(y), _vol(g), _vol(v),
                                            _vol(a), _vol(b))
        assert float(nll) == pytest.approx(ref_nll, abs=1e-9)
        assert float(reg) == pytest.approx(ref_reg, abs=1e-9)

    def test_combined(self):
        x, y = _fixtures(4)
        rng = np.random.default_rng(5)
        v = rng.random(x.shape) + 0.5
        a = rng.random(x.shape) + 1.5
        b = rng.random(x.shape) + 0.5
        pred = tuple(torch.from_numpy(t) for t in (x, v, a, b))
        ours = float(combined_loss(pred, torch.from_numpy(y)))
        ref = quality.combined_loss(
            _vol(x), _vol(y),
            nig_maps=(_vol(x), _vol(v), _vol(a), _vol(b))).total
        assert ours == pytest.approx(ref, abs=1e-9)


class TestGradcheck:
    def test_charbonnier_gradient(self):
        rng = np.random.default_rng(6)
        y = torch.from_numpy(rng.random((4, 4)))
        # keep |x - y| well away from the sqrt kink so h=1e-3 stays accurate
        x = y + torch.from_numpy(rng.uniform(0.2, 0.8, (4, 4))
                                 * rng.choice([-1.0, 1.0], (4, 4)))
        rep = gradcheck(lambda t: charbonnier(t, y), x, name="charbonnier")
        assert rep.max_rel_err < 1e-4

    def test_ssim_loss_gradient(self):
        rng = np.random.default_rng(7)
        y = torch.from_numpy(rng.random((2, 6, 6)))
        x = torch.from_numpy(rng.random((2, 6, 6)))
        rep = gradcheck(lambda t: ssim_loss(t, y), x, name="ssim_loss")
        assert rep.max_rel_err < 1e-4

    def test_nig_loss_gradient_all_inputs(self):
        rng = np.random.default_rng(8)
        y = torch.from_numpy(rng.random((4, 4)))
        g = y + torch.from_numpy(rng.uniform(0.2, 0.6, (4, 4)))
        raw = torch.from_numpy(np.concatenate([
            g.numpy()[None], rng.uniform(0.5, 1.5, (1, 4, 4)),
            rng.uniform(1.5, 2.5, (1, 4, 4)), rng.uniform(0.5, 1.5, (1, 4, 4))]))

        def fn(t):
            nll, reg = nig_loss(y, t[0], t[1], t[2], t[3])
            return nll + 0.01 * reg

        rep = gradcheck(fn, raw, name="nig")
        assert rep.max_rel_err < 1e-4

    def test_charbonnier_gradient_zero_at_minimum(self):
        y = torch.rand(4, 4, dtype=torch.float64)
        x = y.clone().requires_grad_(True)
        charbonnier(x, y).backward()
        assert float(x.grad.abs().max()) < 1e-8

    def test_nig_gamma_gradient_zero_at_residual_minimum(self):
        y = torch.rand(4, 4, dtype=torch.float64)
        g = y.clone().requires_grad_(True)
        v = torch.full_like(y, 1.0)
        a = torch.full_like(y, 2.0)
        b = torch.full_like(y, 0.5)
        nll, _reg = nig_loss(y, g, v, a, b)
        nll.backward()
        assert float(g.grad.abs().max()) < 1e-6

    def test_nig_analytic_gamma_gradient_matches_oracle(self):
        rng = np.random.default_rng(9)
        y = torch.from_numpy(rng.random((4, 4)))
        g = torch.from_numpy(rng.random((4, 4))).requires_grad_(True)
        v = torch.from_numpy(rng.random((4, 4)) + 0.5)
        a = torch.from_numpy(rng.random((4, 4)) + 1.5)
        b = torch.from_numpy(rng.random((4, 4)) + 0.5)
        nll, _ = nig_loss(y, g, v, a, b)
        nll.backward()
        ref = quality.nig_nll_grad_gamma(y.numpy(), g.detach().numpy(),
                                         v.numpy(), a.numpy(), b.numpy())
        assert np.allclose(g.grad.numpy(), ref / y.numel(), atol=1e-12)

    def test_mismatch_raises_with_location(self):
        x = torch.tensor([[0.3, 0.7]])
        with pytest.raises(GradMismatch, match="broken"):
            gradcheck(lambda t: (t ** 2).sum() + t.detach().sum(), x,
                      name="broken")

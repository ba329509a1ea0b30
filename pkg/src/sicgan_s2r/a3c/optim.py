from __future__ import annotations

import torch


class SharedRMSprop(torch.optim.Optimizer):
    """RMSProp whose running averages live in shared memory next to the global parameters.

    Workers in other processes call ``step`` after writing gradients into the
    shared parameters' ``.grad``; updates are element-wise and unlocked.
    """

    def __init__(self, params, lr: float = 1e-4, alpha: float = 0.99, eps: float = 1e-5):
        if lr <= 0 or not 0 < alpha < 1 or eps <= 0:
            raise ValueError("invalid RMSProp hyperparameters")
        super().__init__(params, dict(lr=lr, alpha=alpha, eps=eps))
        for group in self.param_groups:
            for p in group["params"]:
                self.state[p]["square_avg"] = torch.zeros_like(p.data)

    def share_memory(self):
        for group in self.param_groups:
            for p in group["params"]:
                self.state[p]["square_avg"].share_memory_()
        return self

    @torch.no_grad()
    def step(self, closure=None):
        for group in self.param_groups:
            lr, alpha, eps = group["lr"], group["alpha"], group["eps"]
            for p in group["params"]:
                if p.grad is None:
                    continue
                sq = self.state[p]["square_avg"]
                sq.mul_(alpha).addcmul_(p.grad, p.grad, value=1 - alpha)
                p.addcdiv_(p.grad, sq.sqrt().add_(eps), value=-lr)

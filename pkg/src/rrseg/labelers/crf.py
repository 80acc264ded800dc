"""Linear-chain CRF layer: log-space forward algorithm, Viterbi, marginals.

Scores a label sequence as start[y_0] + Σ emissions[t, y_t]
+ Σ transitions[y_{t-1}, y_t] + end[y_{n-1}]. All partition computations run
in log space, so chains of length 1000 stay finite. Viterbi ties are broken
toward the lowest label index at every decision point.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
import torch
from torch import nn

from ..errors import NumericsError


def _check_finite(t: torch.Tensor, what: str) -> None:
    if not torch.isfinite(t).all():
        raise NumericsError(f"{what} contain NaN or Inf")


class LinearChainCRF(nn.Module):
    def __init__(self, num_labels: int, init_scale: float = 0.1):
        super().__init__()
        if num_labels < 1:
            raise ValueError(f"num_labels must be positive, got {num_labels}")
        self.num_labels = num_labels
        self.transitions = nn.Parameter(torch.empty(num_labels, num_labels))
        self.start = nn.Parameter(torch.empty(num_labels))
        self.end = nn.Parameter(torch.empty(num_labels))
        if init_scale > 0:
            for p in (self.transitions, self.start, self.end):
                nn.init.uniform_(p, -init_scale, init_scale)
        else:
            for p in (self.transitions, self.start, self.end):
                nn.init.zeros_(p)

    # -- single sequence --

    def score(self, emissions: torch.Tensor, tags: torch.Tensor) -> torch.Tensor:
        n = emissions.shape[0]
        s = self.start[tags[0]] + emissions[0, tags[0]] + self.end[tags[n - 1]]
        for t in range(1, n):
            s = s + self.transitions[tags[t - 1], tags[t]] + emissions[t, tags[t]]
        return s

    def log_partition(self, emissions: torch.Tensor) -> torch.Tensor:
        alpha = self.start + emissions[0]
        for t in range(1, emissions.shape[0]):
            alpha = torch.logsumexp(alpha.unsqueeze(1) + self.transitions, dim=0) + emissions[t]
        return torch.logsumexp(alpha + self.end, dim=0)

    def nll(self, emissions: torch.Tensor, tags: torch.Tensor) -> torch.Tensor:
        """logZ − score(tags) for one unpadded sequence."""
        if emissions.ndim != 2 or emissions.shape[1] != self.num_labels:
            raise ValueError(f"emissions must be n x {self.num_labels}, got {tuple(emissions.shape)}")
        if emissions.shape[0] == 0:
            raise ValueError("empty sequence")
        _check_finite(emissions, "emissions")
        return self.log_partition(emissions) - self.score(emissions, tags)

    # -- padded batch --

    def batch_nll(self, emissions: torch.Tensor, tags: torch.Tensor,
                  mask: torch.Tensor) -> torch.Tensor:
        """Per-sequence NLL over a padded batch: (B, T, K), (B, T), bool (B, T).

        mask[:, 0] must be all true (sequences are left-aligned).
        """
        if emissions.ndim != 3:
            raise ValueError(f"expected (B, T, K) emissions, got {tuple(emissions.shape)}")
        _check_finite(emissions, "emissions")
        if not bool(mask[:, 0].all()):
            raise ValueError("mask[:, 0] must be all true")
        B, T, K = emissions.shape
        maskf = mask.to(emissions.dtype)
        lengths = mask.sum(dim=1)

        # gold path score
        batch_idx = torch.arange(B)
        score = self.start[tags[:, 0]] + emissions[:, 0].gather(1, tags[:, 0:1]).squeeze(1)
        for t in range(1, T):
            step = (
                self.transitions[tags[:, t - 1], tags[:, t]]
                + emissions[:, t].gather(1, tags[:, t : t + 1]).squeeze(1)
            )
            score = score + step * maskf[:, t]
        last = (lengths - 1).clamp(min=0)
        score = score + self.end[tags[batch_idx, last]]

        # partition
        alpha = self.start.unsqueeze(0) + emissions[:, 0]
        for t in range(1, T):
            nxt = torch.logsumexp(alpha.unsqueeze(2) + self.transitions.unsqueeze(0), dim=1)
            nxt = nxt + emissions[:, t]
            keep = mask[:, t].unsqueeze(1)
            alpha = torch.where(keep, nxt, alpha)
        log_z = torch.logsumexp(alpha + self.end.unsqueeze(0), dim=1)
        return log_z - score

    # -- inference --

    def _params_np(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            self.transitions.detach().cpu().numpy().astype(np.float64),
            self.start.detach().cpu().numpy().astype(np.float64),
            self.end.detach().cpu().numpy().astype(np.float64),
        )

    def decode(self, emissions: torch.Tensor | np.ndarray) -> list[int]:
        """Viterbi path for one sequence; ties go to the lowest label index."""
        if isinstance(emissions, torch.Tensor):
            _check_finite(emissions, "emissions")
            em = emissions.detach().cpu().numpy().astype(np.float64)
        else:
            em = np.asarray(emissions, dtype=np.float64)
            if not np.isfinite(em).all():
                raise NumericsError("emissions contain NaN or Inf")
        if em.ndim != 2 or em.shape[0] == 0:
            raise ValueError(f"expected nonempty n x K emissions, got shape {em.shape}")
        trans, start, end = self._params_np()
        n = em.shape[0]
        delta = start + em[0]
        back = np.zeros((n, self.num_labels), dtype=np.int64)
        for t in range(1, n):
            scores = delta[:, None] + trans
            back[t] = scores.argmax(axis=0)
            delta = scores.max(axis=0) + em[t]
        delta = delta + end
        label = int(delta.argmax())
        path = [label]
        for t in range(n - 1, 0, -1):
            label = int(back[t, label])
            path.append(label)
        return path[::-1]

    def decode_batch(self, emissions: torch.Tensor, mask: torch.Tensor) -> list[list[int]]:
        lengths = mask.sum(dim=1).tolist()
        return [self.decode(emissions[b, : int(n)]) for b, n in enumerate(lengths)]

    def marginals(self, emissions: torch.Tensor) -> torch.Tensor:
        """Posterior P(y_t = k) per position via forward-backward, one sequence."""
        _check_finite(emissions, "emissions")
        n = emissions.shape[0]
        alphas = [self.start + emissions[0]]
        for t in range(1, n):
            alphas.append(
                torch.logsumexp(alphas[-1].unsqueeze(1) + self.transitions, dim=0)
                + emissions[t]
            )
        betas = [self.end]
        for t in range(n - 2, -1, -1):
            betas.append(
                torch.logsumexp(
                    self.transitions + emissions[t + 1] + betas[-1], dim=1
                )
            )
        betas.reverse()
        log_z = torch.logsumexp(alphas[-1] + self.end, dim=0)
        out = torch.stack([a + b for a, b in zip(alphas, betas)]) - log_z
        return out.exp()


def crf_nll(emissions, gold: Sequence[int], crf: LinearChainCRF) -> float:
    """Sequence NLL as a plain float; accepts array-likes."""
    em = torch.as_tensor(np.asarray(emissions, dtype=np.float64))
    tags = torch.as_tensor(np.asarray(gold, dtype=np.int64))
    with torch.no_grad():
        dtype = crf.transitions.dtype
        return float(crf.nll(em.to(dtype), tags))


def crf_decode(emissions, crf: LinearChainCRF) -> list[int]:
    """Viterbi label indices as a plain list; accepts array-likes."""
    return crf.decode(np.asarray(emissions, dtype=np.float64))

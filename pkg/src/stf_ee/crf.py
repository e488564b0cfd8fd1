"""Linear-chain CRF: forward-algorithm NLL and Viterbi decoding.

The sequence score is the sum of per-position emission scores plus
transition scores between adjacent tags; there are no separate start/end
transitions. Emissions are raw linear logits. Decoding ties are broken
toward the smallest tag id at every step, so degenerate inputs decode to
the all-O sequence (O is tag id 0 by construction).
"""
from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .errors import ShapeMismatch
from .labels import repair_bio


def _check_shapes(emissions: torch.Tensor, transitions: torch.Tensor, n_tags_expected=None):
    if emissions.dim() != 2:
        raise ShapeMismatch(f"emissions must be (N, T), got {tuple(emissions.shape)}")
    n_tags = emissions.shape[1]
    if transitions.shape != (n_tags, n_tags):
        raise ShapeMismatch(
            f"transitions must be ({n_tags}, {n_tags}), got {tuple(transitions.shape)}"
        )
    if n_tags_expected is not None and n_tags != n_tags_expected:
        raise ShapeMismatch(f"expected {n_tags_expected} tags, got {n_tags}")


def crf_negative_log_likelihood(
    emissions: torch.Tensor,
    transitions: torch.Tensor,
    gold_tags,
) -> torch.Tensor:
    """NLL of one tag sequence: log-partition minus the gold path score."""
    _check_shapes(emissions, transitions)
    n, n_tags = emissions.shape
    tags = torch.as_tensor(gold_tags, dtype=torch.long, device=emissions.device)
    if tags.shape != (n,):
        raise ShapeMismatch(f"gold tags must have length {n}, got {tuple(tags.shape)}")
    if tags.numel() and (tags.min() < 0 or tags.max() >= n_tags):
        raise ShapeMismatch("gold tag id outside the tagset")

    gold = emissions[torch.arange(n), tags].sum()
    if n > 1:
        gold = gold + transitions[tags[:-1], tags[1:]].sum()

    alpha = emissions[0]
    for t in range(1, n):
        alpha = torch.logsumexp(alpha.unsqueeze(1) + transitions, dim=0) + emissions[t]
    return torch.logsumexp(alpha, dim=0) - gold


def crf_sequence_score(
    emissions: torch.Tensor, transitions: torch.Tensor, tags
) -> torch.Tensor:
    """Unnormalized score of one tag sequence."""
    _check_shapes(emissions, transitions)
    n = emissions.shape[0]
    tags = torch.as_tensor(tags, dtype=torch.long, device=emissions.device)
    score = emissions[torch.arange(n), tags].sum()
    if n > 1:
        score = score + transitions[tags[:-1], tags[1:]].sum()
    return score


def crf_decode(
    emissions: torch.Tensor,
    transitions: torch.Tensor,
    bio_tagset: tuple[str, ...] | None = None,
) -> list[int]:
    """Viterbi argmax over tag sequences.

    With a BIO tagset given, stray I-x tags are repaired to B-x after
    decoding.
    """
    _check_shapes(emissions, transitions)
    em = emissions.detach().cpu().double().numpy()
    tr = transitions.detach().cpu().double().numpy()
    path = _viterbi_single(em, tr)
    if bio_tagset is not None:
        path = repair_bio(path, bio_tagset)
    return path


def _viterbi_single(em: np.ndarray, tr: np.ndarray) -> list[int]:
    n, n_tags = em.shape
    score = em[0].copy()
    backpointers = []
    for t in range(1, n):
        total = score[:, None] + tr
        best_prev = np.argmax(total, axis=0)  # first max = smallest prev tag
        score = total[best_prev, np.arange(n_tags)] + em[t]
        backpointers.append(best_prev)
    tag = int(np.argmax(score))
    path = [tag]
    for bp in reversed(backpointers):
        tag = int(bp[tag])
        path.append(tag)
    path.reverse()
    return path


def viterbi_decode_batch(
    emissions: np.ndarray,
    lengths: np.ndarray,
    transitions: np.ndarray,
) -> list[list[int]]:
    """Vectorized Viterbi over a padded batch; same tie rule as crf_decode."""
    batch, max_len, n_tags = emissions.shape
    score = emissions[:, 0].copy()
    backs = np.zeros((batch, max_len, n_tags), dtype=np.int64)
    for t in range(1, max_len):
        total = score[:, :, None] + transitions[None]
        best_prev = np.argmax(total, axis=1)
        new_score = np.take_along_axis(total, best_prev[:, None, :], axis=1)[:, 0, :]
        new_score = new_score + emissions[:, t]
        active = (t < lengths)[:, None]
        score = np.where(active, new_score, score)
        backs[:, t] = np.where(active, best_prev, np.arange(n_tags)[None])
    # score rows freeze once t reaches a sequence's length, so the final
    # array holds each sequence's scores at its own last position
    paths = []
    for b in range(batch):
        n = int(lengths[b])
        tag = int(np.argmax(score[b]))
        path = [tag]
        for t in range(n - 1, 0, -1):
            tag = int(backs[b, t, tag])
            path.append(tag)
        path.reverse()
        paths.append(path)
    return paths


def crf_nll_batch(
    emissions: torch.Tensor,
    tags: torch.Tensor,
    lengths: torch.Tensor,
    transitions: torch.Tensor,
) -> torch.Tensor:
    """Per-sequence NLL over a padded batch; shape (B,)."""
    batch, max_len, n_tags = emissions.shape
    mask = torch.arange(max_len, device=emissions.device)[None, :] < lengths[:, None]
    fmask = mask.to(emissions.dtype)

    emit = emissions.gather(2, tags.unsqueeze(2)).squeeze(2)
    gold = (emit * fmask).sum(dim=1)
    if max_len > 1:
        trans = transitions[tags[:, :-1], tags[:, 1:]]
        gold = gold + (trans * fmask[:, 1:]).sum(dim=1)

    alpha = emissions[:, 0]
    for t in range(1, max_len):
        nxt = torch.logsumexp(alpha.unsqueeze(2) + transitions[None], dim=1) + emissions[:, t]
        alpha = torch.where(mask[:, t].unsqueeze(1), nxt, alpha)
    log_z = torch.logsumexp(alpha, dim=1)
    return log_z - gold


class LinearChainCrf(nn.Module):
    """Emission projection plus a learned tag-transition matrix."""

    def __init__(self, input_dim: int, n_tags: int):
        super().__init__()
        self.n_tags = n_tags
        self.emission = nn.Linear(input_dim, n_tags)
        self.transitions = nn.Parameter(torch.zeros(n_tags, n_tags))

    def emissions(self, reps: torch.Tensor) -> torch.Tensor:
        return self.emission(reps)

    def nll(self, reps: torch.Tensor, tags: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """Mean-ready per-sequence NLL for padded batched representations."""
        return crf_nll_batch(self.emissions(reps), tags, lengths, self.transitions)

    def decode_batch(self, reps: torch.Tensor, lengths: torch.Tensor) -> list[list[int]]:
        with torch.no_grad():
            em = self.emissions(reps).detach().cpu().double().numpy()
        return viterbi_decode_batch(em, lengths.cpu().numpy(), self.transitions.detach().cpu().double().numpy())

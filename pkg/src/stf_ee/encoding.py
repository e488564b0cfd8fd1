"""Trainable token encoder: embeddings plus a small self-attention stack.

Deliberately lightweight (default width 64, two blocks) so the whole
pipeline trains in seconds on a CPU. Dropout is omitted everywhere; runs
must be bit-reproducible under a fixed seed.
"""
from __future__ import annotations

import math

import torch
from torch import nn

from .errors import EmptyInput, OutOfBounds

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"


class Vocab:
    """Token-to-id mapping with reserved pad/unk entries."""

    def __init__(self, tokens: list[str]):
        self.itos = [PAD_TOKEN, UNK_TOKEN] + tokens
        self.stoi = {tok: i for i, tok in enumerate(self.itos)}

    @staticmethod
    def build(sentences: list[list[str]]) -> "Vocab":
        seen: dict[str, None] = {}
        for sent in sentences:
            for tok in sent:
                seen.setdefault(tok, None)
        return Vocab(sorted(seen))

    def __len__(self) -> int:
        return len(self.itos)

    @property
    def pad_id(self) -> int:
        return 0

    def encode(self, tokens: list[str]) -> list[int]:
        unk = self.stoi[UNK_TOKEN]
        return [self.stoi.get(tok, unk) for tok in tokens]

    def to_list(self) -> list[str]:
        return self.itos[2:]


class SelfAttentionBlock(nn.Module):
    """Pre-norm multi-head self-attention block with a two-layer FFN."""

    def __init__(self, dim: int, n_heads: int, ffn_dim: int):
        super().__init__()
        if dim % n_heads != 0:
            raise ValueError("hidden dim must be divisible by the head count")
        self.n_heads = n_heads
        self.head_dim = dim // n_heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.out = nn.Linear(dim, dim)
        self.norm1 = nn.LayerNorm(dim)
        self.norm2 = nn.LayerNorm(dim)
        self.ffn = nn.Sequential(nn.Linear(dim, ffn_dim), nn.GELU(), nn.Linear(ffn_dim, dim))

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor | None = None) -> torch.Tensor:
        # x: (B, N, D); pad_mask: (B, N) True where the token is real
        batch, n, dim = x.shape
        h = self.norm1(x)
        q, k, v = self.qkv(h).chunk(3, dim=-1)

        def heads(t):
            return t.view(batch, n, self.n_heads, self.head_dim).transpose(1, 2)

        q, k, v = heads(q), heads(k), heads(v)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        if pad_mask is not None:
            blocked = ~pad_mask[:, None, None, :]
            scores = scores.masked_fill(blocked, float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        ctx = (attn @ v).transpose(1, 2).reshape(batch, n, dim)
        x = x + self.out(ctx)
        x = x + self.ffn(self.norm2(x))
        return x


class TokenEncoder(nn.Module):
    """Produces one contextual vector per token."""

    def __init__(
        self,
        vocab_size: int,
        dim: int = 64,
        n_layers: int = 2,
        n_heads: int = 4,
        ffn_dim: int = 128,
        max_len: int = 64,
    ):
        super().__init__()
        self.dim = dim
        self.max_len = max_len
        self.token_emb = nn.Embedding(vocab_size, dim, padding_idx=0)
        self.pos_emb = nn.Embedding(max_len, dim)
        self.blocks = nn.ModuleList(
            SelfAttentionBlock(dim, n_heads, ffn_dim) for _ in range(n_layers)
        )
        self.norm = nn.LayerNorm(dim)

    def forward(self, token_ids: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        # token_ids: (B, N) padded with 0; lengths: (B,)
        batch, n = token_ids.shape
        if n == 0:
            raise EmptyInput("cannot encode an empty sentence")
        if n > self.max_len:
            raise OutOfBounds(f"sentence of {n} tokens exceeds max length {self.max_len}")
        positions = torch.arange(n, device=token_ids.device)
        x = self.token_emb(token_ids) + self.pos_emb(positions)[None]
        pad_mask = positions[None, :] < lengths[:, None]
        for block in self.blocks:
            x = block(x, pad_mask)
        return self.norm(x)


def pad_batch(id_lists: list[list[int]], device=None) -> tuple[torch.Tensor, torch.Tensor]:
    """Stack variable-length id lists into a padded (B, N) tensor plus lengths."""
    if not id_lists or any(len(ids) == 0 for ids in id_lists):
        raise EmptyInput("batch contains an empty sentence")
    max_len = max(len(ids) for ids in id_lists)
    batch = torch.zeros(len(id_lists), max_len, dtype=torch.long, device=device)
    lengths = torch.zeros(len(id_lists), dtype=torch.long, device=device)
    for i, ids in enumerate(id_lists):
        batch[i, : len(ids)] = torch.as_tensor(ids, dtype=torch.long)
        lengths[i] = len(ids)
    return batch, lengths

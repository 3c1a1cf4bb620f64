"""Joint velocity network: condition encoder, single-stream and coupled fusion blocks"""
import math
from typing import List, Sequence

import numpy as np
import torch
from torch import nn

from jrm_lab.jrm_lab_exception import CapacityError, DimensionError, NonFiniteError
from jrm_lab.model_config import COUPLED, ModelConfig


def timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal embedding of noise levels in [0, 1], scaled by 1000"""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=t.dtype, device=t.device) / half)
    args = (t * 1000.0)[:, None] * freqs[None, :]
    return torch.cat([torch.cos(args), torch.sin(args)], dim=-1)


def modulate(x: torch.Tensor, shift: torch.Tensor, scale: torch.Tensor) -> torch.Tensor:
    """adaptive layer-norm modulation"""
    return x * (1 + scale.unsqueeze(1)) + shift.unsqueeze(1)


def attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    """softmax(q k^T / sqrt(d)) v over the last two axes"""
    scores = q @ k.transpose(-2, -1) / math.sqrt(q.shape[-1])
    return torch.softmax(scores, dim=-1) @ v


class TokenBlock(nn.Module):
    """Self-attention and feed-forward with time modulation and gated residuals"""

    def __init__(self, width: int, heads: int, mlp_ratio: int):
        super().__init__()
        self.heads = heads
        self.norm1 = nn.LayerNorm(width, elementwise_affine=False, eps=1e-6)
        self.qkv = nn.Linear(width, 3 * width)
        self.proj = nn.Linear(width, width)
        self.norm2 = nn.LayerNorm(width, elementwise_affine=False, eps=1e-6)
        self.mlp = nn.Sequential(nn.Linear(width, mlp_ratio * width), nn.GELU(approximate="tanh"),
                                 nn.Linear(mlp_ratio * width, width))
        self.modulation = nn.Sequential(nn.SiLU(), nn.Linear(width, 6 * width))

    def attend(self, x: torch.Tensor) -> torch.Tensor:
        """multi-head self-attention over the token axis"""
        batch, tokens, width = x.shape
        qkv = self.qkv(x).reshape(batch, tokens, 3, self.heads, width // self.heads).permute(2, 0, 3, 1, 4)
        out = attention(qkv[0], qkv[1], qkv[2])
        return self.proj(out.transpose(1, 2).reshape(batch, tokens, width))

    def forward(self, x: torch.Tensor, t_embed: torch.Tensor) -> torch.Tensor:
        shift1, scale1, gate1, shift2, scale2, gate2 = self.modulation(t_embed).chunk(6, dim=-1)
        x = x + gate1.unsqueeze(1) * self.attend(modulate(self.norm1(x), shift1, scale1))
        return x + gate2.unsqueeze(1) * self.mlp(modulate(self.norm2(x), shift2, scale2))


def single_stream_block(block: TokenBlock, latents: torch.Tensor, cond: torch.Tensor,
                        t_embed: torch.Tensor) -> torch.Tensor:
    """One object's latents attend jointly with its own condition tokens; latents are returned"""
    joined = block(torch.cat([latents, cond], dim=1), t_embed)
    return joined[:, :latents.shape[1]]


def coupled_fusion_block(block: TokenBlock, z_list: Sequence[torch.Tensor],
                         t_embed: torch.Tensor) -> List[torch.Tensor]:
    """Attention over the concatenated latents of all objects, split back per object"""
    shapes = {tuple(z.shape) for z in z_list}
    if len(shapes) != 1:
        raise DimensionError("Coupled objects must share one token shape")
    tokens = z_list[0].shape[1]
    fused = block(torch.cat(list(z_list), dim=1), t_embed)
    return list(fused.split(tokens, dim=1))


class ConditionEncoder(nn.Module):
    """Permutation-invariant point encoder: learned queries plus a mean/max pooled token"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        width = config.width
        self.point_mlp = nn.Sequential(nn.Linear(config.point_features, width), nn.GELU(approximate="tanh"),
                                       nn.Linear(width, width))
        self.queries = nn.Parameter(torch.randn(config.cond_tokens - 1, width) * 0.02)
        self.q_proj = nn.Linear(width, width)
        self.k_proj = nn.Linear(width, width)
        self.v_proj = nn.Linear(width, width)
        self.out_proj = nn.Linear(width, width)
        self.pool_proj = nn.Linear(2 * width, width)
        self.null_tokens = nn.Parameter(torch.randn(config.cond_tokens, width) * 0.02)

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        """(p, point_features) -> (cond_tokens, width)"""
        if points.shape[0] == 0:
            return self.null_tokens
        features = self.point_mlp(points)
        pooled = self.pool_proj(torch.cat([features.mean(dim=0), features.max(dim=0).values]))
        tokens = attention(self.q_proj(self.queries), self.k_proj(features), self.v_proj(features))
        return torch.cat([self.out_proj(tokens), pooled.unsqueeze(0)], dim=0)


class JrmDenoiser(nn.Module):
    """Velocity network shared across objects, with coupled blocks fusing objects' latents"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        width = config.width
        self.config = config
        self.token_embed = nn.Linear(config.token_width, width)
        self.time_embed = nn.Sequential(nn.Linear(config.time_embed_dim, width), nn.SiLU(),
                                        nn.Linear(width, width))
        self.encoder = ConditionEncoder(config)
        self.layout = config.block_layout()
        self.blocks = nn.ModuleList([TokenBlock(width, config.heads, config.mlp_ratio) for _ in self.layout])
        self.final_norm = nn.LayerNorm(width, elementwise_affine=False, eps=1e-6)
        self.final_modulation = nn.Sequential(nn.SiLU(), nn.Linear(width, 2 * width))
        self.head = nn.Linear(width, config.token_width)

    def zero_head(self):
        """velocity is identically 0 after this"""
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def encode_condition(self, observation) -> torch.Tensor:
        """Condition tokens of an Observation or a (p, 6) point+normal array; empty maps to null tokens"""
        if hasattr(observation, "normals"):
            rows = np.concatenate([observation.points, observation.normals], axis=1)
        else:
            rows = np.asarray(observation, dtype=np.float64).reshape(-1, self.config.point_features)
        param = self.token_embed.weight
        return self.encoder(torch.as_tensor(rows, dtype=param.dtype, device=param.device))

    def encode_groups(self, groups) -> torch.Tensor:
        """(B, K, cond_tokens, width) for B groups of K observations"""
        return torch.stack([torch.stack([self.encode_condition(obs) for obs in group]) for group in groups])

    def forward(self, z: torch.Tensor, t: torch.Tensor, cond: torch.Tensor, coupled: bool = True):
        """z (B, K, n, L), t (B,), cond (B, K, m, width) -> velocities (B, K, n, L)"""
        # pylint: disable=arguments-differ
        config = self.config
        if z.dim() != 4 or z.shape[2:] != (config.token_count, config.token_width):
            raise DimensionError("Latents must have shape (B, K, token_count, token_width)")
        batch, count = z.shape[:2]
        if count > config.max_k:
            raise CapacityError("At most %d objects can be denoised jointly" % config.max_k)
        if cond.shape[:2] != (batch, count) or cond.shape[-1] != config.width:
            raise DimensionError("One condition token set per object is required")
        if t.shape != (batch,):
            raise DimensionError("One noise level per group is required")

        t_embed = self.time_embed(timestep_embedding(t, config.time_embed_dim))
        t_flat = t_embed.repeat_interleave(count, dim=0)
        x = self.token_embed(z).reshape(batch * count, config.token_count, config.width)
        c = cond.reshape(batch * count, cond.shape[2], config.width)
        for kind, block in zip(self.layout, self.blocks):
            if kind == COUPLED:
                if not coupled:
                    continue
                streams = list(x.reshape(batch, count, config.token_count, config.width).unbind(1))
                x = torch.stack(coupled_fusion_block(block, streams, t_embed), dim=1)
                x = x.reshape(batch * count, config.token_count, config.width)
            else:
                x = single_stream_block(block, x, c, t_flat)
        shift, scale = self.final_modulation(t_flat).chunk(2, dim=-1)
        out = self.head(modulate(self.final_norm(x), shift, scale))
        if not torch.isfinite(out).all():
            raise NonFiniteError("Non-finite activation in the denoiser output")
        return out.reshape(batch, count, config.token_count, config.token_width)

    def forward_list(self, z_list, t, cond_list, coupled: bool = True) -> List[torch.Tensor]:
        """List form: K tensors (n, L) and K condition sets (m, width) for one group"""
        if len(z_list) != len(cond_list):
            raise DimensionError("One condition token set per object is required")
        t = torch.as_tensor(t, dtype=z_list[0].dtype).reshape(1)
        out = self(torch.stack(list(z_list)).unsqueeze(0), t, torch.stack(list(cond_list)).unsqueeze(0),
                   coupled)
        return list(out[0].unbind(0))

    def parameter_layout(self):
        """(name, shape) in serialisation order"""
        return [(name, list(param.shape)) for name, param in self.named_parameters()]


def init_params(config: ModelConfig, seed: int, dtype=torch.float32) -> JrmDenoiser:
    """Default torch initialisation under a forked seeded RNG, with the output head zeroed"""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = JrmDenoiser(config)
    model.zero_head()
    return model.to(dtype)


def normalize_tokens(tokens: torch.Tensor) -> torch.Tensor:
    """Re-normalises the normal half of generated tokens; zero normals become +y"""
    positions, normals = tokens[..., :3], tokens[..., 3:6]
    length = normals.norm(dim=-1, keepdim=True)
    up = torch.zeros_like(normals)
    up[..., 1] = 1.0
    normals = torch.where(length > 1e-12, normals / length.clamp_min(1e-12), up)
    return torch.cat([positions, normals, tokens[..., 6:]], dim=-1)

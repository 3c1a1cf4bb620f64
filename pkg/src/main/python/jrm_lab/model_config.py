"""Contains the ModelConfig class"""
from dataclasses import asdict, dataclass, fields
from enum import Enum
from typing import List

from jrm_lab.jrm_lab_exception import ConfigurationError


class CoupledVariant(Enum):
    """Where coupled fusion blocks go among the single-stream blocks"""
    REPLACE = "Replace"
    INSERT = "Insert"


SINGLE = "single"
COUPLED = "coupled"


@dataclass(frozen=True)
class ModelConfig:
    """Denoiser hyper-parameters"""
    # pylint: disable=too-many-instance-attributes
    depth_single: int = 6
    variant: CoupledVariant = CoupledVariant.REPLACE
    width: int = 128
    heads: int = 4
    token_count: int = 64
    token_width: int = 6
    cond_tokens: int = 17
    max_k: int = 9
    time_embed_dim: int = 64
    mlp_ratio: int = 4
    point_features: int = 6

    def __post_init__(self):
        if not isinstance(self.variant, CoupledVariant):
            try:
                object.__setattr__(self, "variant", CoupledVariant(self.variant))
            except ValueError as ex:
                raise ConfigurationError("Unknown coupled block variant") from ex
        for item in fields(self):
            value = getattr(self, item.name)
            if item.name != "variant" and (not isinstance(value, int) or value < 1):
                raise ConfigurationError("Model setting " + item.name + " must be a positive integer")
        if self.width % self.heads != 0:
            raise ConfigurationError("Model width must be divisible by heads")
        if self.time_embed_dim % 2 != 0:
            raise ConfigurationError("Time embedding dimension must be even")
        if self.cond_tokens < 2:
            raise ConfigurationError("Condition encoder needs at least one query and the pooled token")

    def block_layout(self) -> List[str]:
        """block kinds in execution order"""
        if self.variant is CoupledVariant.REPLACE:
            return [COUPLED if slot % 2 == 1 else SINGLE for slot in range(self.depth_single)]
        return [kind for _ in range(self.depth_single) for kind in (SINGLE, COUPLED)]

    def parameter_count(self) -> int:
        """Closed-form number of trainable scalars"""
        w, r = self.width, self.mlp_ratio
        queries = self.cond_tokens - 1
        embed = (self.token_width + 1) * w + (self.time_embed_dim + 1) * w + w * w + w
        encoder = (self.point_features * w + w + w * w + w + queries * w + 4 * (w * w + w)
                   + 2 * w * w + w + self.cond_tokens * w)
        block = (10 + 2 * r) * w * w + (11 + r) * w
        final = 2 * w * w + 2 * w + w * self.token_width + self.token_width
        return embed + encoder + len(self.block_layout()) * block + final

    def to_json(self):
        """returns the configuration in json format"""
        data = asdict(self)
        data["variant"] = self.variant.value
        return data

    @classmethod
    def from_json(cls, data: dict) -> "ModelConfig":
        """Builds a config from to_json output"""
        known = {item.name for item in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError("Unknown model setting " + sorted(unknown)[0])
        return cls(**data)

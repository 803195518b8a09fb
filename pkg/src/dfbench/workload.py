"""Analytic cost model for decoder-block LLM training workloads.

Parameter counts use per-tensor counting for two decoder families:

* ``gpt2-style``: learned token + positional embeddings, LayerNorm (weight and
  bias), biased projections, a 2-matrix MLP of width ``ffn_multiplier * h``.
  Per block: ``4h^2 + 4h`` (attention) ``+ 2*h*f + f + h`` (MLP) ``+ 4h``
  (two LayerNorms), i.e. ``12h^2 + 13h`` at the default ``f = 4h``.
* ``llama2-style``: token embeddings only, RMSNorm (weight only), unbiased
  projections, a gated 3-matrix MLP. Per block: ``4h^2 + 3*h*f + 2h``.

Both add a final norm (``2h`` for LayerNorm, ``h`` for RMSNorm). The output
head is assumed tied to the token embedding and is not counted again.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from .errors import DomainError, ValidationError

FAMILIES = ("gpt2-style", "llama2-style")

DEFAULT_C_ACT = 34
DEFAULT_BYTES_PER_PARAM = 4.0

PARAM_FORMULAS = {
    "gpt2-style": "V*h + S*h + L*(4h^2 + 4h + 2*h*f + f + h + 4h) + 2h, f = ffn_multiplier*h",
    "llama2-style": "V*h + L*(4h^2 + 3*h*f + 2h) + h, f = ffn_multiplier*h",
}
FLOPS_FORMULA = "6 * P * B * S"
ACTIVATION_FORMULA = "L * B * S * h * c_act * precision_bytes [+ L * B * heads * S^2 * precision_bytes]"
AI_FORMULA = "flops / (bytes_per_param * P + activation_bytes)"


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValidationError("ffn_multiplier must be a number", field="ffn_multiplier")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            pass
    raise ValidationError(f"cannot read ffn_multiplier {value!r} as a rational", field="ffn_multiplier")


def _positive_int(name, value, allow_zero=False):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{name} must be an integer, got {value!r}", field=name)
    if value < 0 or (value == 0 and not allow_zero):
        bound = "non-negative" if allow_zero else "positive"
        raise ValidationError(f"{name} must be {bound}, got {value}", field=name)
    return value


@dataclass(frozen=True)
class ModelConfig:
    """A decoder-only model plus the batch shape it is trained with."""

    family: str
    hidden_size: int
    num_layers: int
    num_heads: int
    vocab_size: int
    seq_len: int
    batch_size: int
    ffn_multiplier: Fraction | None = None
    precision_bytes: int = 2
    has_bias: bool | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"family must be one of {FAMILIES}, got {self.family!r}", field="family")
        _positive_int("hidden_size", self.hidden_size)
        _positive_int("num_layers", self.num_layers, allow_zero=True)
        _positive_int("num_heads", self.num_heads)
        _positive_int("vocab_size", self.vocab_size)
        _positive_int("seq_len", self.seq_len)
        _positive_int("batch_size", self.batch_size)
        _positive_int("precision_bytes", self.precision_bytes)
        if self.hidden_size % self.num_heads:
            raise ValidationError(
                f"hidden_size {self.hidden_size} is not divisible by num_heads {self.num_heads}",
                field="num_heads",
            )
        mult = self.ffn_multiplier
        if mult is None:
            mult = Fraction(4) if self.family == "gpt2-style" else Fraction(8, 3)
        mult = _as_fraction(mult)
        if mult <= 0:
            raise ValidationError("ffn_multiplier must be positive", field="ffn_multiplier")
        object.__setattr__(self, "ffn_multiplier", mult)
        if self.has_bias is None:
            object.__setattr__(self, "has_bias", self.family == "gpt2-style")
        elif not isinstance(self.has_bias, bool):
            raise ValidationError("has_bias must be a boolean", field="has_bias")

    @property
    def ffn_size(self) -> int:
        """MLP width, ``ffn_multiplier * h`` rounded half-up to an integer."""
        return math.floor(self.ffn_multiplier * self.hidden_size + Fraction(1, 2))

    @property
    def tokens_per_step(self) -> int:
        return self.batch_size * self.seq_len

    def replace(self, **changes) -> "ModelConfig":
        d = self.to_dict()
        d.update(changes)
        return ModelConfig.from_dict(d)

    def to_dict(self) -> dict:
        d = asdict(self)
        m = self.ffn_multiplier
        d["ffn_multiplier"] = m.numerator if m.denominator == 1 else f"{m.numerator}/{m.denominator}"
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        if not isinstance(data, dict):
            raise ValidationError("workload must be a mapping", field="workload")
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"unknown workload field(s): {', '.join(unknown)}", field=unknown[0])
        missing = [
            f for f in ("family", "hidden_size", "num_layers", "num_heads", "vocab_size", "seq_len", "batch_size")
            if f not in data
        ]
        if missing:
            raise ValidationError(f"missing workload field(s): {', '.join(missing)}", field=missing[0])
        return cls(**data)


@dataclass(frozen=True)
class WorkloadProfile:
    param_count: int
    flops_per_step: float
    weight_traffic_bytes: float
    activation_bytes: float
    arithmetic_intensity: float
    c_act: float = DEFAULT_C_ACT
    attention_scores: bool = False
    bytes_per_param: float = DEFAULT_BYTES_PER_PARAM
    formulas: dict = field(default_factory=dict)


def block_param_count(cfg: ModelConfig) -> int:
    h = cfg.hidden_size
    f = cfg.ffn_size
    if cfg.family == "gpt2-style":
        attn = 4 * h * h + (4 * h if cfg.has_bias else 0)
        mlp = 2 * h * f + ((f + h) if cfg.has_bias else 0)
        norms = 4 * h
        return attn + mlp + norms
    attn = 4 * h * h + (4 * h if cfg.has_bias else 0)
    mlp = 3 * h * f + ((2 * f + h) if cfg.has_bias else 0)
    return attn + mlp + 2 * h


def embedding_param_count(cfg: ModelConfig) -> int:
    h = cfg.hidden_size
    n = cfg.vocab_size * h
    if cfg.family == "gpt2-style":
        n += cfg.seq_len * h
    return n


def final_norm_param_count(cfg: ModelConfig) -> int:
    return 2 * cfg.hidden_size if cfg.family == "gpt2-style" else cfg.hidden_size


def param_count(cfg: ModelConfig) -> int:
    """Total trainable parameters: embeddings, decoder blocks, final norm."""
    return embedding_param_count(cfg) + cfg.num_layers * block_param_count(cfg) + final_norm_param_count(cfg)


def training_flops(cfg: ModelConfig, p: int) -> float:
    """FLOPs of one training step, 2x forward plus 4x backward per token."""
    if p < 0:
        raise ValidationError("parameter count must be non-negative", field="param_count")
    # exact integer product, rounded once
    return float(6 * int(p) * cfg.batch_size * cfg.seq_len)


def activation_memory(cfg: ModelConfig, c_act: float = DEFAULT_C_ACT, attention_scores: bool = False) -> float:
    """Stored activation bytes for one step under a linear per-layer model.

    ``c_act`` is the number of stored element slots per token per hidden unit.
    The optional quadratic term adds one ``S x S`` score tensor per head.
    """
    if c_act < 0:
        raise ValidationError("c_act must be non-negative", field="c_act")
    L, B, S, h, pb = cfg.num_layers, cfg.batch_size, cfg.seq_len, cfg.hidden_size, cfg.precision_bytes
    total = L * B * S * h * c_act * pb
    if attention_scores:
        total += L * B * cfg.num_heads * S * S * pb
    return float(total)


def arithmetic_intensity(p: int, flops: float, act_bytes: float, bytes_per_param: float = DEFAULT_BYTES_PER_PARAM) -> float:
    if p < 0 or flops < 0 or act_bytes < 0 or bytes_per_param < 0:
        raise ValidationError("arithmetic intensity inputs must be non-negative")
    denom = bytes_per_param * p + act_bytes
    if denom <= 0:
        raise DomainError("empty memory traffic")
    return flops / denom


def profile(
    cfg: ModelConfig,
    c_act: float = DEFAULT_C_ACT,
    attention_scores: bool = False,
    bytes_per_param: float = DEFAULT_BYTES_PER_PARAM,
) -> WorkloadProfile:
    p = param_count(cfg)
    flops = training_flops(cfg, p)
    act = activation_memory(cfg, c_act, attention_scores)
    ai = arithmetic_intensity(p, flops, act, bytes_per_param)
    return WorkloadProfile(
        param_count=p,
        flops_per_step=flops,
        weight_traffic_bytes=float(bytes_per_param * p),
        activation_bytes=act,
        arithmetic_intensity=ai,
        c_act=c_act,
        attention_scores=attention_scores,
        bytes_per_param=bytes_per_param,
        formulas={
            "param_count": PARAM_FORMULAS[cfg.family],
            "training_flops": FLOPS_FORMULA,
            "activation_memory": ACTIVATION_FORMULA,
            "arithmetic_intensity": AI_FORMULA,
        },
    )

"""Training-run arithmetic: LR schedule, compute estimates, layout checks.

Nothing here touches an accelerator.  The functions reproduce the numbers a
training run is configured from: the warmup/cosine learning-rate curve, the
floating-point operation count implied by an architecture and a token budget,
and the consistency of a 3-D parallelism layout against a node allocation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, TonguegraftError

# Dense bf16 peak of the accelerator the efficiency numbers are quoted
# against, in TFLOP/s.
DEFAULT_PEAK_TFLOPS = 312.0


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and schedule settings; defaults follow the reference runs."""

    total_steps: int
    max_lr: float = 1.0e-4
    warmup_steps: int = 1000
    final_lr_fraction: float = 1.0 / 30.0
    batch_sequences: int = 1024
    context_length: int = 4096
    beta1: float = 0.9
    beta2: float = 0.95
    eps: float = 1.0e-8
    weight_decay: float = 0.1
    grad_clip: float = 1.0

    def __post_init__(self) -> None:
        if self.total_steps <= 0:
            raise ConfigError("total_steps must be positive")
        if not 0 < self.warmup_steps < self.total_steps:
            raise ConfigError(
                f"warmup_steps must be in (0, total_steps), got {self.warmup_steps}"
            )
        if self.max_lr <= 0:
            raise ConfigError("max_lr must be positive")
        if not 0 < self.final_lr_fraction <= 1:
            raise ConfigError("final_lr_fraction must be in (0, 1]")
        if self.batch_sequences <= 0 or self.context_length <= 0:
            raise ConfigError("batch_sequences and context_length must be positive")

    @property
    def tokens_per_batch(self) -> int:
        return self.batch_sequences * self.context_length


def lr_at(config: TrainConfig, step: int) -> float:
    """Learning rate at an integer step.

    Linear warmup from 0 to ``max_lr`` over ``warmup_steps``, then cosine
    decay to ``max_lr * final_lr_fraction`` at ``total_steps``.  The curve is
    continuous at the warmup boundary and non-increasing after it.
    """
    if not 0 <= step <= config.total_steps:
        raise TonguegraftError(
            f"step {step} outside the schedule [0, {config.total_steps}]"
        )
    if step <= config.warmup_steps:
        return config.max_lr * step / config.warmup_steps
    final = config.max_lr * config.final_lr_fraction
    progress = (step - config.warmup_steps) / (config.total_steps - config.warmup_steps)
    return final + (config.max_lr - final) * 0.5 * (1.0 + math.cos(math.pi * progress))


@dataclass(frozen=True)
class ArchSpec:
    """Decoder-only transformer shape, gated MLP, optional grouped-query KV."""

    d_model: int
    n_heads: int
    n_layers: int
    context: int
    vocab_size: int
    gqa: bool = False
    n_kv_heads: int | None = None
    ffn_dim: int | None = None
    params: int | None = None

    def __post_init__(self) -> None:
        for name in ("d_model", "n_heads", "n_layers", "context", "vocab_size"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.d_model % self.n_heads != 0:
            raise ConfigError("d_model must be divisible by n_heads")
        if self.kv_heads > self.n_heads or self.n_heads % self.kv_heads != 0:
            raise ConfigError("n_kv_heads must divide n_heads")

    @property
    def kv_heads(self) -> int:
        if self.n_kv_heads is not None:
            return self.n_kv_heads
        # Grouped-query attention at the conventional 8 KV heads.
        return 8 if self.gqa else self.n_heads

    @property
    def ffn(self) -> int:
        if self.ffn_dim is not None:
            return self.ffn_dim
        # Gated MLP sizing: two thirds of 4x width, rounded up to 256.
        return math.ceil(self.d_model * 8 / 3 / 256) * 256

    @property
    def kv_dim(self) -> int:
        return self.d_model * self.kv_heads // self.n_heads

    def param_count(self) -> int:
        """Parameter count; derived from the shape unless given explicitly."""
        if self.params is not None:
            return self.params
        d, f = self.d_model, self.ffn
        attention = 2 * d * d + 2 * d * self.kv_dim
        mlp = 3 * d * f
        norms = 2 * d
        embeddings = 2 * self.vocab_size * d  # untied input and output tables
        return self.n_layers * (attention + mlp + norms) + embeddings + d


# Published shapes the toolkit's numbers are checked against.  The vocabulary
# is the expanded one (base 32,000 plus 11,176 grafted tokens).
REFERENCE_ARCHS: dict[str, ArchSpec] = {
    "7b": ArchSpec(
        d_model=4096, n_heads=32, n_layers=32, context=4096,
        vocab_size=43176, gqa=False, ffn_dim=11008,
    ),
    "13b": ArchSpec(
        d_model=5120, n_heads=40, n_layers=40, context=4096,
        vocab_size=43176, gqa=False, ffn_dim=13824,
    ),
    "70b": ArchSpec(
        d_model=8192, n_heads=64, n_layers=80, context=4096,
        vocab_size=43176, gqa=True, ffn_dim=28672,
    ),
}

REFERENCE_MAX_LR: dict[str, float] = {"7b": 1.0e-4, "13b": 1.0e-4, "70b": 5.0e-5}


@dataclass(frozen=True)
class FlopsEstimate:
    """Training compute for a token budget, two ways.

    ``total`` comes from a per-layer account of the transformer forward pass
    (attention projections sized for grouped-query KV, quadratic attention,
    three-matrix gated MLP, output head) times three for the backward pass.
    ``first_order_total`` is the 6 * params * tokens shorthand.
    """

    tokens: int
    per_token: float
    total: float
    first_order_per_token: float
    first_order_total: float
    params: int


def estimate_flops(arch: ArchSpec, tokens: int) -> FlopsEstimate:
    """Estimate training FLOPs for ``tokens`` under ``arch``.

    Counts multiply-adds as two operations.  Per layer and token the forward
    pass costs the four attention projections (K and V shrunk by the KV-head
    ratio), the score and value contractions against ``context`` positions,
    and the three gated-MLP matrices; the LM head is paid once.  Training
    cost is three times the forward pass.
    """
    if tokens <= 0:
        raise ConfigError("token count must be positive")
    d, s, f = arch.d_model, arch.context, arch.ffn
    attn_proj = 2 * d * d * 2 + 2 * d * arch.kv_dim * 2
    attn_scores = 4 * s * d
    mlp = 6 * d * f
    head = 2 * d * arch.vocab_size
    forward = arch.n_layers * (attn_proj + attn_scores + mlp) + head
    per_token = 3.0 * forward
    params = arch.param_count()
    first_order = 6.0 * params
    return FlopsEstimate(
        tokens=tokens,
        per_token=per_token,
        total=per_token * tokens,
        first_order_per_token=first_order,
        first_order_total=first_order * tokens,
        params=params,
    )


@dataclass(frozen=True)
class LayoutReport:
    """Consistency of data/tensor/pipeline parallelism against an allocation."""

    dp: int
    tp: int
    pp: int
    nodes: int
    gpus_per_node: int
    ok: bool
    product: int
    total_gpus: int
    hints: tuple[str, ...]

    def lines(self) -> list[str]:
        out = [
            f"parallelism\tdp={self.dp} tp={self.tp} pp={self.pp}",
            f"product\t{self.product}",
            f"allocation\t{self.nodes} nodes x {self.gpus_per_node} gpus = {self.total_gpus}",
            f"consistent\t{str(self.ok).lower()}",
        ]
        out.extend(f"hint\t{h}" for h in self.hints)
        return out


def validate_layout(
    dp: int, tp: int, pp: int, nodes: int, gpus_per_node: int
) -> LayoutReport:
    """Check dp*tp*pp against the allocation and add placement hints.

    Tensor-parallel groups exchange activations every layer, so a hint flags
    whether ``tp`` fits inside one node's worth of devices.
    """
    for name, value in (("dp", dp), ("tp", tp), ("pp", pp), ("nodes", nodes), ("gpus_per_node", gpus_per_node)):
        if value <= 0:
            raise ConfigError(f"{name} must be positive")
    product = dp * tp * pp
    total = nodes * gpus_per_node
    hints: list[str] = []
    if tp <= gpus_per_node and gpus_per_node % tp == 0:
        hints.append(f"tensor-parallel groups of {tp} fit within a {gpus_per_node}-gpu node")
    else:
        hints.append(
            f"tensor-parallel groups of {tp} span node boundaries on "
            f"{gpus_per_node}-gpu nodes; expect interconnect pressure"
        )
    if product != total:
        hints.append(f"dp*tp*pp = {product} but the allocation provides {total} gpus")
    return LayoutReport(
        dp=dp, tp=tp, pp=pp, nodes=nodes, gpus_per_node=gpus_per_node,
        ok=product == total, product=product, total_gpus=total, hints=tuple(hints),
    )


def throughput_efficiency(measured_tflops: float, peak_tflops: float = DEFAULT_PEAK_TFLOPS) -> float:
    """Fraction of peak throughput achieved."""
    if measured_tflops < 0 or peak_tflops <= 0:
        raise ConfigError("throughput values must be positive")
    return measured_tflops / peak_tflops

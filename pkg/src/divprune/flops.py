"""Transformer FLOP accounting for token pruning.

A decoder layer over a prefill of mu tokens with hidden size d and FFN
intermediate size m costs

    f(mu) = 4*mu*d**2 - 2*mu**2*d + 2*mu*d*m

floating point operations (attention projections + scores + FFN).  When
pruning drops the visual token count from M to M_kept after
``prune_layer`` of ``layers`` total layers, the prefill cost ratio is

    ratio = (K * f(mu) + (T - K) * f(mu_kept)) / (T * f(mu))

with mu = text + visual, mu_kept = text + kept, K = prune_layer,
T = layers.  All quantities are integers, so evaluating the polynomial
in float64 is exact at realistic model sizes (every intermediate stays
well below 2**53).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import BudgetTooLarge, ModelOutOfRange, NonPositiveDimension


def _check_int(name: str, value, minimum: int) -> int:
    if int(value) != value or value < minimum:
        raise NonPositiveDimension(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class FlopModelConfig:
    """Model shape for the ratio in :func:`tflop_ratio`.

    Defaults describe a 32-layer 4096-wide decoder with an 11008-wide
    FFN and 576 visual tokens pruned to 56 before the first decoder
    layer (prune_layer 0).
    """

    layers: int = 32
    hidden: int = 4096
    ffn: int = 11008
    text_tokens: int = 40
    visual_tokens: int = 576
    kept_tokens: int = 56
    prune_layer: int = 0

    def __post_init__(self):
        _check_int("layers", self.layers, 1)
        _check_int("hidden", self.hidden, 1)
        _check_int("ffn", self.ffn, 1)
        _check_int("text_tokens", self.text_tokens, 0)
        _check_int("visual_tokens", self.visual_tokens, 0)
        _check_int("kept_tokens", self.kept_tokens, 0)
        _check_int("prune_layer", self.prune_layer, 0)
        if self.prune_layer > self.layers:
            raise NonPositiveDimension(
                f"prune_layer {self.prune_layer} exceeds layers {self.layers}")
        if self.kept_tokens > self.visual_tokens:
            raise BudgetTooLarge(
                f"kept_tokens {self.kept_tokens} exceeds visual_tokens {self.visual_tokens}")
        if self.text_tokens + self.visual_tokens < 1:
            raise NonPositiveDimension("sequence before pruning must hold at least one token")
        if self.text_tokens + self.kept_tokens < 1:
            raise NonPositiveDimension("sequence after pruning must hold at least one token")

    @property
    def seq_len(self) -> int:
        return self.text_tokens + self.visual_tokens

    @property
    def seq_len_pruned(self) -> int:
        return self.text_tokens + self.kept_tokens


def layer_flops(seq_len: int, hidden: int, ffn: int) -> float:
    """Per-layer prefill cost 4*s*d**2 - 2*s**2*d + 2*s*d*m as float64.

    Zero or negative cost means the quadratic attention term dominates
    (prefill of 2*hidden + ffn tokens or longer), outside the regime the
    model describes; that case raises :class:`ModelOutOfRange`.
    """
    s = _check_int("seq_len", seq_len, 1)
    d = _check_int("hidden", hidden, 1)
    m = _check_int("ffn", ffn, 1)
    value = 4 * s * d * d - 2 * s * s * d + 2 * s * d * m  # exact int
    if value <= 0:
        raise ModelOutOfRange(
            f"layer cost is {value} for seq_len={s}, hidden={d}, ffn={m}; "
            "prefill exceeds the quadratic break-even at 2*hidden + ffn tokens")
    return float(value)


def flop_totals(config: FlopModelConfig) -> tuple[float, float]:
    """(unpruned, pruned) prefill cost across all layers, exact float64."""
    full = layer_flops(config.seq_len, config.hidden, config.ffn)
    reduced = layer_flops(config.seq_len_pruned, config.hidden, config.ffn)
    original = config.layers * full
    if config.prune_layer == config.layers or config.kept_tokens == config.visual_tokens:
        return original, original
    pruned = config.prune_layer * full + (config.layers - config.prune_layer) * reduced
    return original, pruned


def tflop_ratio(config: FlopModelConfig) -> float:
    """Pruned-to-original prefill cost ratio, in (0, 1] on the valid domain.

    Exactly 1.0 when nothing is pruned (kept_tokens == visual_tokens)
    or pruning happens after the last layer.
    """
    original, pruned = flop_totals(config)
    if pruned == original:
        return 1.0
    return pruned / original


def sweep_ratio(config: FlopModelConfig, kept_values) -> list[tuple[int, float]]:
    """(kept, ratio) at each retained-token count, rest of the shape fixed.

    Strictly increasing in kept when prune_layer < layers.
    """
    out = []
    for kept in kept_values:
        k = _check_int("kept token count", kept, 0)
        out.append((k, tflop_ratio(replace(config, kept_tokens=k))))
    return out

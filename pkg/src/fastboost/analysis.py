"""Static parameter and MAC/FLOP accounting over an architecture config.

The counter walks the same structure build_network allocates, so its
parameter total must equal the built model's trainable scalar count
exactly. Convention: one MAC per multiply; FLOPs = 2*MACs; activations,
pooling, and (inference-folded) batch norm cost zero MACs. Elementwise
multiplies in the fusion stage are counted.
"""

from __future__ import annotations

from dataclasses import dataclass

from .blocks import SE_FLOOR, SE_REDUCTION, SPATIAL_KERNEL
from .config import ArchConfig, block_channel_progression, validate_config
from .tensor import GeometryError


@dataclass(frozen=True)
class CostRow:
    name: str
    kind: str
    params: int
    macs: int


@dataclass(frozen=True)
class CostReport:
    rows: tuple[CostRow, ...]
    params: int
    macs: int
    flops: int
    input_hw: int | None

    def format(self) -> str:
        lines = [f"{'layer':<34} {'kind':<12} {'params':>10} {'macs':>14}"]
        for r in self.rows:
            lines.append(f"{r.name:<34} {r.kind:<12} {r.params:>10} {r.macs:>14}")
        geom = f"input {self.input_hw}x{self.input_hw}" if self.input_hw else "no geometry"
        lines.append("-" * 72)
        lines.append(f"total params {self.params:,}")
        lines.append(f"total MACs   {self.macs:,} ({geom})")
        lines.append(f"total FLOPs  {self.flops:,} (2 per MAC; activations, pooling, "
                     "and folded batch norm cost zero)")
        return "\n".join(lines)


def _stage_resolutions(cfg: ArchConfig, input_hw: int) -> list[int]:
    n_stages = len(cfg.stage_channels)
    if input_hw < 8:
        raise GeometryError(f"input size must be >= 8, got {input_hw}")
    if input_hw % (1 << (n_stages - 1)):
        raise GeometryError(
            f"input size {input_hw} not divisible by {1 << (n_stages - 1)} "
            f"as required by {n_stages - 1} pooling stages"
        )
    return [input_hw >> i for i in range(n_stages)]


def _walk(cfg: ArchConfig, input_hw: int | None) -> list[CostRow]:
    validate_config(cfg)
    res = _stage_resolutions(cfg, input_hw) if input_hw else [0] * len(cfg.stage_channels)
    rows: list[CostRow] = []

    def conv_row(name, kind, c_out, c_in, k, area):
        rows.append(CostRow(name, kind, c_out * c_in * k * k, c_out * c_in * k * k * area))

    def bn_row(name, channels):
        rows.append(CostRow(name, "batchnorm", 2 * channels, 0))

    def linear_row(name, f_in, f_out):
        rows.append(CostRow(name, "linear", f_in * f_out + f_out, f_in * f_out))

    area0 = (input_hw * input_hw) if input_hw else 0
    conv_row("stem.conv", "conv3x3", cfg.stem_out, 3, 3, area0)
    bn_row("stem.bn", cfg.stem_out)

    prev = cfg.stem_out
    for b, (c_out, exps) in enumerate(zip(cfg.stage_channels, cfg.expansions)):
        area = res[b] * res[b]
        progression = block_channel_progression(c_out, cfg.layers_per_block)
        c_in = prev
        for i, (c, e) in enumerate(zip(progression, exps)):
            hidden = e * c_in
            tag = f"block{b}.mbconv{i}"
            if e > 1:
                conv_row(f"{tag}.expand", "pointwise", hidden, c_in, 1, area)
                bn_row(f"{tag}.expand_bn", hidden)
            rows.append(CostRow(f"{tag}.depthwise", "depthwise",
                                hidden * 9, hidden * 9 * area))
            bn_row(f"{tag}.depthwise_bn", hidden)
            conv_row(f"{tag}.project", "pointwise", c, hidden, 1, area)
            bn_row(f"{tag}.project_bn", c)
            c_in = c

        se_hidden = max(c_out // SE_REDUCTION, SE_FLOOR)
        linear_row(f"block{b}.attn.fc1", c_out, se_hidden)
        linear_row(f"block{b}.attn.fc2", se_hidden, c_out)
        k = SPATIAL_KERNEL
        rows.append(CostRow(f"block{b}.attn.spatial", "conv",
                            2 * k * k + 1, 2 * k * k * area))
        # Fusion multiplies: x*gate, scale*(..), lambda*x over the map,
        # plus the two per-gate weightings.
        fuse_macs = 3 * c_out * area + c_out + area
        fuse_params = 1 if cfg.lambda_mode == "learnable" else 0
        rows.append(CostRow(f"block{b}.attn.fuse", "elementwise", fuse_params, fuse_macs))
        prev = c_out

    linear_row("classifier.fc1", prev, cfg.classifier_hidden)
    linear_row("classifier.fc2", cfg.classifier_hidden, cfg.num_classes)
    return rows


def _report(rows: list[CostRow], input_hw: int | None) -> CostReport:
    params = sum(r.params for r in rows)
    macs = sum(r.macs for r in rows)
    return CostReport(tuple(rows), params, macs, 2 * macs, input_hw)


def count_params(cfg: ArchConfig) -> CostReport:
    """Closed-form parameter totals; no tensor construction, no geometry."""
    return _report(_walk(cfg, None), None)


def count_macs(cfg: ArchConfig, input_hw: int) -> CostReport:
    """Parameter and MAC totals at a given square input size."""
    return _report(_walk(cfg, input_hw), input_hw)


def pattern_label(cfg: ArchConfig) -> str:
    return "-".join(str(e) for e in cfg.expansions[0])


def sweep(configs: list[ArchConfig], input_hw: int = 32) -> list[dict]:
    """One summary row per config: the static columns of an expansion sweep."""
    out = []
    for cfg in configs:
        rep = count_macs(cfg, input_hw)
        out.append({
            "pattern": pattern_label(cfg),
            "layers": cfg.layers_per_block,
            "params": rep.params,
            "macs": rep.macs,
            "flops": rep.flops,
        })
    return out


def sweep_csv(configs: list[ArchConfig], input_hw: int = 32) -> str:
    lines = ["pattern,layers,params,macs,flops"]
    for row in sweep(configs, input_hw):
        lines.append(f"{row['pattern']},{row['layers']},{row['params']},"
                     f"{row['macs']},{row['flops']}")
    return "\n".join(lines) + "\n"

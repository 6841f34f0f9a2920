"""Weight-traffic and energy estimates for packed models."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import count_ops
from .pack import layer_bits

# 45 nm figures: fp32 accumulate 0.9 pJ, fp32 multiply-accumulate 4.6 pJ
E_AC_PJ = 0.9
E_MAC_PJ = 4.6
BUS_WIDTH = 32
# DRAM access reduction measured on FPGA for a 6-layer SCNN at eta=5; kept as an
# unmatched reference next to the analytic bit-count ratio
FPGA_REFERENCE_REDUCTION = 3.6


@dataclass(frozen=True)
class LayerTrafficReport:
    layer: int
    bsnn_bits: int
    s2nn_bits: int
    bus_width: int = BUS_WIDTH

    @property
    def ratio(self) -> float:
        return self.s2nn_bits / self.bsnn_bits

    @property
    def reduction(self) -> float:
        return self.bsnn_bits / self.s2nn_bits

    @property
    def bsnn_transfers(self) -> int:
        return math.ceil(self.bsnn_bits / self.bus_width)

    @property
    def s2nn_transfers(self) -> int:
        return math.ceil(self.s2nn_bits / self.bus_width)

    @property
    def transfer_ratio(self) -> float:
        return self.s2nn_transfers / self.bsnn_transfers


def _dims(layer):
    if hasattr(layer, "shape") and hasattr(layer, "eta"):
        c_out, c_in, k_h, k_w = layer.shape
        return c_out, c_in, k_h, k_w, layer.eta
    return tuple(layer)


def traffic_report(model, bus_width: int = BUS_WIDTH) -> list[LayerTrafficReport]:
    """Weight bits moved per layer: one bit per weight vs indices + codebook.

    ``model`` holds QuantizedLayers or ``(c_out, c_in, k_h, k_w, eta)`` tuples.
    """
    reports = []
    for i, layer in enumerate(model):
        c_out, c_in, k_h, k_w, eta = _dims(layer)
        bsnn = c_out * c_in * k_h * k_w
        reports.append(LayerTrafficReport(i, bsnn, layer_bits(c_out, c_in, k_h, k_w, eta), bus_width))
    return reports


def traffic_csv(reports: list[LayerTrafficReport]) -> str:
    lines = ["layer,bsnn_bits,s2nn_bits,bit_ratio,bsnn_transfers,s2nn_transfers,transfer_ratio,bus_width"]
    for r in reports:
        lines.append(
            f"{r.layer},{r.bsnn_bits},{r.s2nn_bits},{r.ratio:.6f},"
            f"{r.bsnn_transfers},{r.s2nn_transfers},{r.transfer_ratio:.6f},{r.bus_width}"
        )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EnergyReport:
    e_mac_pj: float
    e_ac_pj: float
    first_layer_flops: int
    sops: float

    @property
    def mac_energy_pj(self) -> float:
        return self.e_mac_pj * self.first_layer_flops

    @property
    def sop_energy_pj(self) -> float:
        return self.e_ac_pj * self.sops

    @property
    def total_pj(self) -> float:
        return self.mac_energy_pj + self.sop_energy_pj


def energy_estimate(model, input_shape, T: int, fr: float, e_mac_pj: float = E_MAC_PJ, e_ac_pj: float = E_AC_PJ) -> EnergyReport:
    """MAC energy on the first conv layer's FLOPs plus AC energy on later layers' SOPs.

    The first layer sees real-valued (non-spike) input, so it is charged as
    dense multiply-accumulates; every later layer is spike driven.
    """
    if e_mac_pj <= 0 or e_ac_pj <= 0:
        raise ValueError("energies per operation must be positive")
    ops = count_ops(model, input_shape, T, fr)
    if not ops.flops:
        return EnergyReport(e_mac_pj, e_ac_pj, 0, 0.0)
    return EnergyReport(e_mac_pj, e_ac_pj, ops.flops[0], sum(ops.sops[1:]))

"""First-order radio energy model and per-node energy ledger.

tx = e_elec*k + e_amp*k*d^2 for k bits over d km, rx = e_elec*k,
idle power while awake, and a fixed cost per sensor sample.  All
ledger figures are millijoules and only ever increase.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class EnergyParams:
    e_elec_nj_per_bit: float = 50.0
    e_amp_pj_per_bit_km2: float = 100.0
    e_sense_uj: float = 20.0
    p_idle_uw: float = 30.0
    battery_mj: float = 2.0e7

    @property
    def elec_mj_per_bit(self) -> float:
        return self.e_elec_nj_per_bit * 1e-6

    @property
    def amp_mj_per_bit_km2(self) -> float:
        return self.e_amp_pj_per_bit_km2 * 1e-9

    @property
    def sense_mj(self) -> float:
        return self.e_sense_uj * 1e-3

    @property
    def idle_mj_per_s(self) -> float:
        return self.p_idle_uw * 1e-3 * 1e-3  # uW -> mW -> mJ/s


class EnergyLedger:
    __slots__ = ("tx_mJ", "rx_mJ", "idle_mJ", "sensing_mJ")

    def __init__(self):
        self.tx_mJ = 0.0
        self.rx_mJ = 0.0
        self.idle_mJ = 0.0
        self.sensing_mJ = 0.0

    @property
    def total_mJ(self) -> float:
        return self.tx_mJ + self.rx_mJ + self.idle_mJ + self.sensing_mJ


def tx_cost_mj(params: EnergyParams, n_bytes: int, distance_km: float) -> float:
    bits = n_bytes * 8
    return bits * (params.elec_mj_per_bit + params.amp_mj_per_bit_km2 * distance_km * distance_km)


def rx_cost_mj(params: EnergyParams, n_bytes: int) -> float:
    return n_bytes * 8 * params.elec_mj_per_bit


def charge_tx(ledger: EnergyLedger, params: EnergyParams, n_bytes: int, distance_km: float) -> None:
    ledger.tx_mJ += tx_cost_mj(params, n_bytes, distance_km)


def charge_rx(ledger: EnergyLedger, params: EnergyParams, n_bytes: int) -> None:
    ledger.rx_mJ += rx_cost_mj(params, n_bytes)


def charge_idle(ledger: EnergyLedger, params: EnergyParams, seconds: int) -> None:
    ledger.idle_mJ += params.idle_mj_per_s * seconds


def charge_sense(ledger: EnergyLedger, params: EnergyParams) -> None:
    ledger.sensing_mJ += params.sense_mj

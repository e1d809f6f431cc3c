"""Registry of externally claimed reference values under reproduction.

Each claim records the asserted number (with its stated spread when one was
given) and a short locus description. Experiments compare computed values
against these entries; anything outside tolerance becomes a discrepancy
entry, never a silent adjustment. The tolerance rule for table rows is
|computed - claimed| <= 3 x claimed std; claims without a stated spread use
a 1% relative window, which the known-bad arithmetic entries miss by more
than an order of magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Claim:
    key: str
    statement: str
    where: str
    value: float | None
    std: float | None = None


CLAIMS: dict[str, Claim] = {
    c.key: c
    for c in [
        Claim(
            "h2_0915",
            "H2(0.915) ~ 0.456",
            "proof appendix, worked decoupling example",
            0.456,
        ),
        Claim(
            "er_werner_083",
            "E_R at Werner fidelity 0.83 ~ 0.544 bits per pair",
            "proof appendix, worked decoupling example",
            0.544,
        ),
        Claim(
            "hashing_rate_p02",
            "1 - H2(p) - p log2(3) is an achievable distillation rate at p = 0.2",
            "main text, channel construction",
            None,
        ),
        Claim(
            "eb_threshold",
            "the depolarizing channel is not entanglement-breaking for p < 3/4",
            "main text and proof appendix, channel domain",
            0.75,
        ),
        Claim(
            "dd_limit",
            "p' -> 0 as the pulse frequency grows, with p' = p exp(-gamma/f)",
            "main text, decoupling construction",
            0.0,
        ),
        Claim(
            "fidelity_bridge",
            "the channel output equals the F-mixture Werner state with F = 1 - p",
            "proof appendix, channel output form",
            None,
        ),
        Claim(
            "pulse_average_compression",
            "averaging over a Pauli pulse set compresses the depolarizing parameter",
            "proof appendix, pulse-average construction",
            None,
        ),
        Claim(
            "rate_sign",
            "the entanglement rate along the unshaped evolution satisfies dE/dt >= 0",
            "main text, rate-comparison statement",
            None,
        ),
        Claim(
            "table1_er_global",
            "recurrence-distillation global E_R = 0.013 +/- 0.004 at p = 0.2",
            "results table, depolarizing row",
            0.013,
            0.004,
        ),
        Claim(
            "table1_success",
            "recurrence-distillation success probability = 0.31 +/- 0.02 at p = 0.2",
            "results table, depolarizing row",
            0.31,
            0.02,
        ),
        Claim(
            "table1_rate",
            "effective distillable rate 0.004 at p = 0.2",
            "results table, depolarizing row",
            0.004,
        ),
        Claim(
            "table1_pes",
            "shaping-pipeline per-pair E_R = 0.187 +/- 0.009 at p = 0.2",
            "results table, shaping row",
            0.187,
            0.009,
        ),
        Claim(
            "table1_er_selected",
            "success-branch E_R ~ 0.78 for four pairs at p = 0.2",
            "proof appendix, recurrence worked example",
            0.78,
        ),
        Claim(
            "table2_er_global",
            "recurrence-distillation global E_R = 0.021 +/- 0.006 at gamma = 0.3",
            "damping results table",
            0.021,
            0.006,
        ),
        Claim(
            "table2_success",
            "recurrence-distillation success probability = 0.28 +/- 0.02 at gamma = 0.3",
            "damping results table",
            0.28,
            0.02,
        ),
        Claim(
            "table2_rate",
            "effective distillable rate 0.006 at gamma = 0.3",
            "damping results table",
            0.006,
        ),
        Claim(
            "table2_pes",
            "shaping-pipeline per-pair E_R = 0.156 +/- 0.011 at gamma = 0.3",
            "damping results table",
            0.156,
            0.011,
        ),
        Claim(
            "ratio_14",
            "the shaping pipeline retains a factor 14 more global E_R than distillation",
            "flow figure caption",
            14.0,
        ),
        Claim(
            "ad_delta",
            "integrated suppression ~ 0.135 for damping gamma = 0.5",
            "proof appendix, damping check",
            0.135,
        ),
        Claim(
            "pes_calibration",
            "per-pair E_R 0.187 is reachable with finite decoupling from p = 0.2",
            "proof appendix, worked decoupling example",
            0.187,
        ),
    ]
}


def claim(key: str) -> Claim:
    return CLAIMS[key]

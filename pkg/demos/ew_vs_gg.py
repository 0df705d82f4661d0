"""
Exponentiated Weibull against Gamma-Gamma
=========================================

Both turbulence models are run on the same pointing and path-loss draws.
The GG shapes and scale are matched to the first two EW moments, so any
gap comes from the shape of the fading law alone.
"""

from owclink import EwParams, LinkBudget
from owclink.config import PRESETS
from owclink.simulate import MonteCarloConfig, compare_models, moment_matched_gg

g = PRESETS["medium_zero_boresight"].pointing()
cfg = MonteCarloConfig(500_000, seed=21, n_workers=4)

for ew in (EwParams(1.8, 0.9, 0.35), EwParams(3.2, 2.0, 1.0), EwParams(5.8, 1.3, 1.0)):
    gg, mean = moment_matched_gg(ew)
    print(f"EW{(ew.alpha, ew.beta, ew.eta)} -> GG a = b = {gg.a_gg:.3f}, scale {mean:.4f}")
    for g0 in (1e4, 1e8, 1e10):
        cmp = compare_models(ew, gg, g, LinkBudget.from_gamma0(g0), cfg, gg_mean=mean)
        ew_rate = cmp.estimates[("EW", "ergodic_rate")]
        print(f"  gamma0 {g0:8.0e}: EW {ew_rate.mean:7.3f} bits, gap EW - GG "
              f"{cmp.gap('ergodic_rate'):+.3f} bits (+-{1.96 * ew_rate.stderr:.3f})")

# Average SNR matches by construction. The rate gap stays near 0.01 bits
# for the milder EW triples and reaches about 0.1 bits for the strongest
# one at gamma0 = 1e10, where deep fades weigh most.

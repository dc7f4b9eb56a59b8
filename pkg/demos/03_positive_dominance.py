"""When does the whole frequency axis collapse to frequency zero?

The robustness reduction needs gain moduli that peak at zero frequency.
That property is implied by external positivity (a nonnegative impulse
response) but is strictly weaker: a well-damped lag can dip below zero in
the time domain while its frequency response still rolls off monotonically.
Both checks are run here on a family of second-order lags.
"""

import numpy as np

from posmu import StateSpaceSystem, check_external_positivity, check_positive_dominance


def second_order(zeta: float) -> StateSpaceSystem:
    """Unit-gain lag 1 / (s^2 + 2 zeta s + 1)."""
    return StateSpaceSystem(
        a=np.array([[0.0, 1.0], [-1.0, -2.0 * zeta]]),
        b=np.array([[0.0], [1.0]]),
        c=np.array([[1.0, 0.0]]),
        d=np.zeros((1, 1)),
    )


for zeta in (1.2, 0.9, 0.5):
    sys = second_order(zeta)
    dom = check_positive_dominance(sys)
    pos = check_external_positivity(sys)
    print(f"zeta = {zeta}:")
    print(f"  dominance: {dom.verdict}, peak {dom.peaks[0][0]:.6f} "
          f"at w = {dom.peak_frequencies[0][0]:.4f}")
    if pos.positive:
        print("  impulse response: nonnegative over the checked horizon")
    else:
        print(f"  impulse response: first sign change at t = {pos.refuted_at:.4f} "
              f"(dips to {pos.min_value:.2e})")
    print()

print("reading the table:")
print("  zeta = 1.2 is externally positive, hence dominated for free")
print("  zeta = 0.9 fails positivity yet stays dominated: the reduction")
print("             still applies even though the classical test gives up")
print("  zeta = 0.5 resonates above the static gain, so no zero-frequency")
print("             argument can cover the whole axis")

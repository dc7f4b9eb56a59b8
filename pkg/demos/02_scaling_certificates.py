"""Certificates around the threshold mu = 1.

Whether mu < 1 is a feasibility question: does some positive diagonal
scaling push the scaled norm below one?  The cutting-plane engine answers
it either way, and an independent vector search certifies infeasibility
from the other side: a nonnegative unit vector whose energy grows through
every channel proves that no scaling can work.
"""

import numpy as np

from posmu import (
    BlockSpec,
    FeasibilityInstance,
    feasibility_certificate,
    phi,
    q_feasibility_search,
    reduce_structure,
    scaled_norm,
    validate_structure,
)

s = validate_structure([
    BlockSpec(kind="full", size=1, field="real"),
    BlockSpec(kind="full", size=1, field="real"),
    BlockSpec(kind="full", size=1, field="real"),
])
red = reduce_structure(s)

m_small = np.array([
    [0.1, 0.5, 0.1],
    [0.2, 0.1, 0.4],
    [0.3, 0.2, 0.1],
])

print("case 1: a contractive loop")
cert = feasibility_certificate(m_small, 1.0, red)
print(f"  scaling found: {cert.feasible} after {cert.iterations} iterations")
theta = tuple(round(v, 6) for v in cert.theta.values)
print(f"  theta = {theta}")
print(f"  scaled norm = {scaled_norm(m_small, cert.theta, red):.6f} < 1")

search = q_feasibility_search(FeasibilityInstance.from_matrix(m_small, red))
print(f"  adversarial vector found: {search.found} "
      f"(best channel balance {search.value:.4f} < 0)")

m_large = 2.5 * m_small
print("\ncase 2: the same loop amplified by 2.5")
cert = feasibility_certificate(m_large, 1.0, red)
print(f"  scaling found: {cert.feasible}")
search = q_feasibility_search(FeasibilityInstance.from_matrix(m_large, red))
print(f"  adversarial vector found: {search.found}")
if search.found:
    q = search.q
    inst = FeasibilityInstance.from_matrix(m_large, red)
    print(f"  q = {np.round(q, 6)}")
    print(f"  per-channel energy gains phi(q) = {np.round(phi(inst, q), 6)}")
    print("  every channel gains energy, so no diagonal scaling can contract"
          " the loop: mu >= 1 is certified without computing mu")

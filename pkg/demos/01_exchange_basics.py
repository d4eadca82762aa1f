"""The symmetric 3-interval exchange and its rotation correspondence.

A 3-IET swaps three blocks of [0,1) end to end.  It is also the first
return map of a circle rotation to a subinterval, rescaled; this script
walks through both pictures on the running example (0.2, 0.3, 0.5).
"""

import numpy as np

from iet3 import Iet3, apply, apply_pow, from_rotation, orbit, psi_count, to_rotation

iet = Iet3(0.2, 0.3, 0.5)
print("lengths:", iet.l1, iet.l2, iet.l3)
print("breaks at", iet.b1, iet.b2)
print("T(0.1) =", apply(iet, 0.1), "   T(0.25) =", apply(iet, 0.25),
      "   T(0.7) =", apply(iet, 0.7))

rep = to_rotation(iet)
print(f"\nrotation number alpha = {rep.alpha:.6f}, slit length kappa = {rep.kappa:.6f}")
back = from_rotation(rep)
print("round trip recovers lengths:", back.l1, back.l2, back.l3)

# the correspondence in action: iterate the rotation, count slit visits,
# and compare with the corresponding power of the exchange
x_unscaled = 0.123 * rep.kappa
M = 500
visits = psi_count(rep, x_unscaled, M)
end = (x_unscaled + M * rep.alpha) % 1.0
if end < rep.kappa:
    via_T = apply_pow(iet, visits, x_unscaled / rep.kappa) * rep.kappa
    print(f"\nafter {M} rotation steps = {visits} exchange steps:")
    print(f"  rotation lands at {end:.12f}")
    print(f"  exchange lands at {via_T:.12f}")

seg = orbit(iet, 0.1, 12)
print("\nshort orbit of 0.1:", np.round(seg.points, 4))

"""Why the golden mean cannot run the switch construction.

The construction needs renormalization times where the unit vertical return
displaces by rho = N ||N alpha|| below epsilon/10.  For badly approximable
rotation numbers the quantity N ||N alpha|| is bounded below (about 0.447
for the golden mean, the worst case), so no admissible time exists at any
depth.  The scan still finds times near the half-marked square torus under
the declared gauge, and their data shows rho pinned at the golden floor.
"""

import numpy as np

from iet3 import golden_iet
from iet3.construction import SearchFailure, SwitchSpec, build_switch
from iet3.renorm import scan_renorm_times

iet = golden_iet()  # alpha = (sqrt 5 - 1)/2, kappa = 1/1.3
scan = scan_renorm_times(iet, delta=0.45, t_max=12.0)
print("accepted times under a loose gauge (delta = 0.45):")
for rt in scan.times[:8]:
    print(f"  N = {rt.n_steps:>6d}: rho = {rt.rho:.4f}  (floor ~ 1/sqrt(5) = 0.4472)")

try:
    build_switch(iet, SwitchSpec(a=0, b=1, epsilon=0.05), verify_samples=0)
except SearchFailure as exc:
    print(f"\nswitch search fails as it must:\n  {exc}")

"""Which forcings keep the solution converging to zero.

Window averages f_theta decide the outcome, not pointwise size: growing
high-frequency oscillations and ever taller spikes still give decay, while
spikes of fixed area keep the solution bounded but oscillating.
"""

import numpy as np

from pantolab.decomposition import solve_via_decomposition
from pantolab.det_engine import PantographParams, UniformTime, solve_pantograph
from pantolab.diagnostics import classify_limit, f_theta, sup_f_theta
from pantolab.forcing import HighFreqOsc, SequenceRule, ShiftedPower, SpikeTrain

p = PantographParams(0.2, -2.0, 0.5)
cases = {
    "1/(1+t)": (ShiftedPower(1.0, -1.0), UniformTime(1e-2, 400.0)),
    "exp(0.3t) sin(exp(0.9t))": (HighFreqOsc(0.3, 0.9), UniformTime(2e-4, 8.0)),
    "spikes h=n, w=1/n^2": (SpikeTrain(SequenceRule.make("linear", a=1.0), SequenceRule.make("inv_square")),
                            UniformTime(1e-3, 60.0)),
    "spikes h=n, w=1/n": (SpikeTrain(SequenceRule.make("linear", a=1.0),
                                     SequenceRule.make("reciprocal_heights")), UniformTime(1e-3, 60.0)),
}
for name, (f, grid) in cases.items():
    rough = isinstance(f, SpikeTrain)
    sol = solve_via_decomposition(p, f, 1.0, grid) if rough else solve_pantograph(p, f, 1.0, grid)
    lim = classify_limit(sol)
    t_end = grid.t_end
    probes = np.linspace(0.25 * t_end, t_end, 4)
    print(f"{name:28s} verdict={lim.verdict:22s} sup f_theta: "
          + " ".join(f"{sup_f_theta(f, s):.3g}" for s in probes))

spikes = cases["spikes h=n, w=1/n"][0]
print("unit-area spikes, integral over [n, n+1]:", [round(f_theta(spikes, n + 1.0, 1.0), 12) for n in (1, 10, 50)])

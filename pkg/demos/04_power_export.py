"""
Exporting 500 W into the bus
============================

Once connected, the speed loop hands the shaft over to an active power
loop and the field pulses follow the reactive power error.
"""

import math
from pathlib import Path

import numpy as np

from syncrelay import load_scenario_file, run_scenario

scenario = Path(__file__).resolve().parent.parent / "scenarios" / "power_export.cfg"
cfg = load_scenario_file(scenario)
log = run_scenario(cfg)
c = log.columns

for t in np.arange(60, cfg.duration + 1, 5):
    i = int(round(t / log.dt))
    print(f"{t:5.0f} s  P={c['p_w'][i]:7.1f} W  Q={c['q_var'][i]:7.1f} var  "
          f"torque={c['torque_cmd'][i]:5.3f} N m  delta={c['dphi_deg'][i]:6.2f} deg")

###############################################################################
# At steady state the load angle is what the power-angle curve asks for.

e = c["gen_v_ll"][-1] / math.sqrt(3)
v = c["grid_v_ll"][-1] / math.sqrt(3)
expected = math.degrees(math.asin(cfg.power.p_set * cfg.generator.x_sync / (3 * e * v)))
print(f"load angle {c['dphi_deg'][-1]:.3f} deg, curve says {expected:.3f} deg")

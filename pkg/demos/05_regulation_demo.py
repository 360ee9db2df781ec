"""
Regulation: driving a source-fed field to zero
==============================================

A segment of the left wall keeps injecting the field at strength 10 while
the swarm, steered by its velocity control and absorbing through its
intensity control, drives the total field mass toward zero.  The velocity
is box-constrained to 1 per component, so the speed never exceeds sqrt(2).
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from swarmfield.scenario import preset, run

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

result = run(preset("testcase1"), os.path.join(OUT, "regulation"))
report = result.report
print(f"optimizer: J {report.history[0][0]:.4g} -> {report.final_cost:.4g} "
      f"in {report.iterations} iterations ({report.termination})")
print(f"final field mass: controlled {result.mass_controlled[-1]:.4f} "
      f"vs uncontrolled {result.mass_uncontrolled[-1]:.4f}")
print(f"peak speed: {np.hypot(report.control.u_x, report.control.u_y).max():.4f} "
      f"(bound sqrt(2) = {np.sqrt(2):.4f})")

times = np.linspace(0, result.scenario.t_final, len(result.mass_controlled))
fig, axes = plt.subplots(1, 2, figsize=(11, 4.2))
axes[0].plot(times, result.mass_uncontrolled, label="uncontrolled")
axes[0].plot(times, result.mass_controlled, label="controlled")
axes[0].set_xlabel("t")
axes[0].set_ylabel("field mass")
axes[0].set_title("regulation toward zero")
axes[0].legend()

history = np.array(report.history)
axes[1].semilogy(history[:, 0])
axes[1].set_xlabel("accepted iterate")
axes[1].set_ylabel("J")
axes[1].set_title("monotone descent")
fig.tight_layout()
path = os.path.join(OUT, "regulation.png")
fig.savefig(path, dpi=120)
print(f"wrote {path} and VTK/CSV artifacts under {result.out_dir}")

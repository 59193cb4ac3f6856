"""Repair an overlapping collaboration layout and show what the solver decided.

Three 6 cm objects are dropped on two tables with the first two overlapping.
The repair moves them the least squared distance needed to put every object
inside a table and keep every pair apart on at least one axis.
"""
import numpy as np

from sasgen.domains import make_domain
from sasgen.repair import RepairProblem, is_valid

domain = make_domain("collab-I")
cfg = domain.collab

raw = np.array([0.20, 0.50,      # object 1
                0.21, 0.52,      # object 2, overlapping object 1
                -0.05, 0.45])    # object 3, in the gap between the tables
fixed, disp, record = domain.repair_with_record(raw)

print("raw goals     ", raw.reshape(3, 2).round(4).tolist())
print("repaired goals", fixed.reshape(3, 2).round(4).tolist())
print(f"squared cost {record['cost']:.6f}, displacement {disp:.4f} m")
print("table per object  ", record["regions"])
print("separating sides  ", record["sides"])
ok = is_valid(RepairProblem(list(cfg.regions), fixed.reshape(3, 2), cfg.half_side),
              fixed.reshape(3, 2), tol=1e-9)
print("layout valid:", ok)

# The penalty the search applies to infeasible surrogate candidates.
for w in (0.0, 1.0, 100.0):
    print(f"regularizer at weight {w:>5}: {domain.regularizer(raw, w):.4f}")

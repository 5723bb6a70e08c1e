"""How counting plus variance estimation scales with network size.

At fixed expected degree the sparse backend is close to quadratic in n;
for dense graphs a single matrix product is faster and the backend switches
automatically.

    python gallery/05_scaling.py
"""

from lcr.experiments import bench_counting

rep = bench_counting([250, 500, 1000, 2000], mean_degree=10, repeats=2)
print(rep.to_tsv())
print(f"fitted exponent {rep.meta['fitted_exponent']:.2f}")

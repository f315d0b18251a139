"""Benchmark the transfer variants and the registration pipeline.

The harness refuses to publish timings unless the three P^T variants agree
numerically on the same inputs first -- a broken-but-fast kernel should
never look like a win. Checksums in the table make cross-run (and
cross-worker-count) determinism visible at a glance: identical checksum,
identical bits.
"""

from ngfreg import format_table, run_benchmark

records = run_benchmark(
    dims=(32, 32, 32),
    workers_list=(1, 2, 8),
    precisions=("f64", "f32"),
    variants=("gather", "scatter", "redblack"),
    reps=5,
    register_max_iter=5,
)

print(format_table(records))

gather = {(r.precision, r.workers): r.checksum
          for r in records if r.operation == "apply_Pt" and r.variant == "gather"}
per_precision = {}
for (precision, _), chk in gather.items():
    per_precision.setdefault(precision, set()).add(chk)
print()
for precision, sums in sorted(per_precision.items()):
    print(f"gather P^T checksums across worker counts ({precision}): "
          f"{'identical' if len(sums) == 1 else 'DIFFERENT'}")

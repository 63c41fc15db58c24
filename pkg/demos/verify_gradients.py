"""Run every analytic-gradient and oracle cross-check and print the results.

Each suite compares a hand-derived gradient or closed-form quantity against
an independent reference: central finite differences for gradients, an
expanded double-sum for the kernel dependence measure, a brute-force
quadratic-time scan for ranking metrics, and exhaustive enumeration for the
binary-code update. The same suites back the `tailhash check-grad` CLI
subcommand; `--inject-bug` there deliberately perturbs the analytic side to
demonstrate that the checks can fail.
"""

from tailhash import verify

results = verify.run_all(seed=0)
width = max(len(name) for name, _, _ in results)
ok = True
for name, passed, detail in results:
    print(f"{'PASS' if passed else 'FAIL'}  {name:<{width}}  {detail}")
    ok = ok and passed
print("\nall suites passed" if ok else "\nSOME SUITES FAILED")

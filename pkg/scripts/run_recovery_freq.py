"""Exact recovery frequency of OMP, mOLS and PmOLS against K on 128x256 Gaussian matrices.

Runs all three signal kinds with s = 3 and 500 trials per point, which takes
a while on one core; set PMOLS_WORKERS to spread trials over processes.

    python3 scripts/run_recovery_freq.py [out.csv]
"""
from _common import out_path

from pmols.experiments import (
    RECOVERY_FIELDS,
    SIGNAL_KINDS,
    RecoveryConfig,
    critical_sparsity,
    default_workers,
    recovery_frequency,
    write_csv,
)

if __name__ == "__main__":
    path = out_path("recovery_freq.csv")
    cfg = RecoveryConfig(methods=("OMP", "mOLS", "PmOLS"), enforce_selection_bound=False)
    rows = recovery_frequency(cfg, workers=default_workers())
    write_csv(rows, RECOVERY_FIELDS, path)
    for kind in SIGNAL_KINDS:
        crit = {m: critical_sparsity(rows, kind, m) for m in cfg.methods}
        print(f"{kind:>10}: critical sparsity " + ", ".join(f"{m} {k}" for m, k in crit.items()))
    print(f"wrote {path}")

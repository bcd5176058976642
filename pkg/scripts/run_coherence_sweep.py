"""Mean mu(psi) and mu(P psi) against sampling rate, n = 256, 500 trials per rate.

    python3 scripts/run_coherence_sweep.py [out.csv]
"""
from _common import out_path

from pmols.experiments import COHERENCE_FIELDS, CoherenceSweepConfig, coherence_sweep, default_workers, write_csv

if __name__ == "__main__":
    path = out_path("coherence_sweep.csv")
    rows = coherence_sweep(CoherenceSweepConfig(), workers=default_workers())
    write_csv(rows, COHERENCE_FIELDS, path)
    for r in rows:
        print(f"rate {r['rate']:.2f}  mu(psi) {r['mean_mu_psi']:.4f}  mu(P psi) {r['mean_mu_ppsi']:.4f}")
    print(f"wrote {path}")

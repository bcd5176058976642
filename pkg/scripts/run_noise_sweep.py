"""MSE of PmOLS and modified PmOLS against SNR: 128x256, K = 50, Gaussian signals.

    python3 scripts/run_noise_sweep.py [out.csv]
"""
from _common import out_path

from pmols.experiments import NOISE_FIELDS, NoiseConfig, default_workers, noise_sweep, write_csv

if __name__ == "__main__":
    path = out_path("noise_sweep.csv")
    rows = noise_sweep(NoiseConfig(), workers=default_workers())
    write_csv(rows, NOISE_FIELDS, path)
    for r in rows:
        lam = "" if r["method"] == "PmOLS" else f" lam={r['lam']:g}"
        print(f"{r['snr_db']:>4g} dB  {r['method']}{lam:<10}  mse {r['mean_mse']:.4g} +- {r['se_mse']:.2g}")
    print(f"wrote {path}")

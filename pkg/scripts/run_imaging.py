"""Synthetic imaging: GI correlation, mOLS and PmOLS on the built-in 28x28 objects.

Writes the PSNR table as CSV and every reconstruction as PGM next to it.

    python3 scripts/run_imaging.py [out.csv]
"""
import os

from _common import out_path

from pmols.experiments import IMAGING_FIELDS, ImagingConfig, imaging_experiment, write_csv
from pmols.imaging import ObjectImage, save_pgm

if __name__ == "__main__":
    path = out_path("imaging.csv")
    image_dir = os.path.join(os.path.dirname(os.path.abspath(path)), "images")
    os.makedirs(image_dir, exist_ok=True)
    images = {}
    rows = imaging_experiment(ImagingConfig(), images=images)
    write_csv(rows, IMAGING_FIELDS, path)
    for (name, m, method), px in images.items():
        save_pgm(ObjectImage(px.round()), os.path.join(image_dir, f"{name}_m{m}_{method}.pgm"))
    for r in rows:
        score = r["psnr"] if isinstance(r["psnr"], str) else f"{r['psnr']:.2f} dB"
        print(f"{r['object']:>7} m={r['m']} K={r['K']:<3} {r['method']:>6}: {score}")
    print(f"wrote {path} and {image_dir}")

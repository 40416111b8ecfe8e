#!/usr/bin/env python3
"""Classical-enhancement demo on a synthetic degraded image.

Builds a colourful scene, degrades it the way shallow water does (green
cast, blur, washed-out contrast), runs the classical gray-world + border
enhancement pipeline, and prints quality metrics for all three. Optionally
writes the PNGs so the results can be inspected.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from uwie import FppConfig, enhance_classical, gaussian_blur, imgio, uciqe, uiqm


def make_scene(size=96):
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    img = np.stack(
        [
            0.55 + 0.35 * np.sin(9 * xx + 4 * yy),
            0.50 + 0.35 * np.cos(6 * yy),
            0.45 + 0.35 * np.sin(5 * (xx + yy)),
        ]
    )
    return np.clip(img, 0.0, 1.0)


def degrade(img):
    cast = img * np.array([0.35, 0.90, 0.60])[:, None, None]
    hazy = 0.85 * gaussian_blur(cast, 1.2)
    return np.clip(hazy, 0.0, 1.0)


def report(name, img):
    means = img.mean(axis=(1, 2))
    print(
        f"{name:>9}:  uiqm={uiqm(img):7.4f}  uciqe={uciqe(img):7.4f}  "
        f"channel means=({means[0]:.3f}, {means[1]:.3f}, {means[2]:.3f})"
    )


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--omega", type=float, default=1.5)
    parser.add_argument("--lambda-bem", type=float, default=0.5, dest="lambda_bem")
    parser.add_argument("--save-dir", help="write scene/degraded/enhanced PNGs here")
    args = parser.parse_args(argv)

    scene = make_scene()
    degraded = degrade(scene)
    cfg = FppConfig(omega=args.omega, lambda_bem=args.lambda_bem)
    enhanced = enhance_classical(degraded, cfg)

    report("scene", scene)
    report("degraded", degraded)
    report("enhanced", enhanced)
    print("\ngray-world equalizes the channel means (the green cast is gone);")
    print("uiqm rises with the recovered sharpness and balance, while uciqe")
    print("can drop because it scores the cast's chroma as colourfulness.")

    if args.save_dir:
        out = Path(args.save_dir)
        out.mkdir(parents=True, exist_ok=True)
        imgio.save_png(scene, out / "scene.png")
        imgio.save_png(degraded, out / "degraded.png")
        imgio.save_png(enhanced, out / "enhanced.png")
        print(f"wrote PNGs to {out}")


if __name__ == "__main__":
    main()

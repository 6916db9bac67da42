#!/usr/bin/env python3
"""Smoke test for the facthash_py extension module.

Builds the cdylib with cargo if needed, loads it, and checks a handful of
known values against independent Python evaluations.
"""

import math
import pathlib
import shutil
import subprocess
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build_and_import():
    lib = ROOT / "target" / "release" / "libfacthash_py.so"
    if not lib.exists():
        subprocess.run(
            ["cargo", "build", "--release", "-p", "facthash-py"],
            cwd=ROOT,
            check=True,
        )
    target = ROOT / "python" / "facthash_py.so"
    if not target.exists() or lib.stat().st_mtime > target.stat().st_mtime:
        shutil.copyfile(lib, target)
    sys.path.insert(0, str(ROOT / "python"))
    import facthash_py

    return facthash_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    fh = build_and_import()

    # resolution ladder
    res = fh.level_resolutions(16, 512, 16)
    assert res[0] == 16 and res[1] == 20 and res[15] == 512, res

    # spatial hash: row-major when the grid fits, XOR-of-primes otherwise
    assert fh.hash_index([5, 0], 2**14, 7) == 5
    assert fh.hash_index([3, 5], 2**14, 4096) == ((3 * 1) ^ (5 * 2654435761)) % 2**14

    # spherical harmonics basis
    sh = fh.sh_encode([0.0, 0.0, 1.0])
    approx(sh[0], 0.28209479177387814)
    assert len(sh) == 16
    approx(fh.sh_encode([1.0, 0.0, 0.0])[3], 0.4886025119029199)

    # opacity and compositing
    approx(fh.alpha_from_density(10.0, 0.1), 1.0 - math.exp(-1.0))
    color, weights, wsum, _depth = fh.composite(
        [0.5, 0.5], [[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]], [1.0, 2.0], 0.0
    )
    assert weights == [0.5, 0.25], weights
    approx(wsum, 0.75)
    approx(color[0], 0.75)

    # distortion loss: fast form vs naive double loop
    w = [0.1, 0.2, 0.05, 0.3]
    s = [0.1, 0.4, 0.6, 0.9]
    ds = [0.05, 0.05, 0.05, 0.05]
    fast = fh.loss_distortion(w, s, ds)
    slow = fh.loss_distortion_naive(w, s, ds)
    approx(fast, slow, tol=1e-12)
    ref = sum(
        w[i] * w[j] * abs(s[i] - s[j]) for i in range(4) for j in range(4)
    ) + sum(w[i] ** 2 * ds[i] for i in range(4)) / 3.0
    approx(fast, ref, tol=1e-12)

    # metrics
    approx(fh.psnr([0.5] * 48, [0.6] * 48), 20.0, tol=1e-4)
    img = [0.3] * (16 * 16 * 3)
    approx(fh.ssim(img, img, 16, 16), 1.0, tol=1e-9)

    # encoders
    enc = fh.FactHashEncoder(16, 256, 8, 2, 14, 0)
    feat = enc.encode([0.25, 0.5, 0.75])
    assert len(feat) == 16 and all(math.isfinite(v) for v in feat)
    # parameter count: 3 planes * sum_l min(T, (N_l+1)^2) * F
    res8 = fh.level_resolutions(16, 256, 8)
    expect = 3 * sum(min(2**14, (n + 1) ** 2) * 2 for n in res8)
    assert enc.param_count() == expect, (enc.param_count(), expect)

    grid = fh.HashGridEncoder(8, 64, 4, 2, 12, 0)
    assert len(grid.encode([0.1, 0.2, 0.3])) == 8
    assert grid.param_count() == sum(
        min(2**12, (n + 1) ** 3) * 2 for n in fh.level_resolutions(8, 64, 4)
    )

    # oracle rendering produces a plausible image
    rgb, w_, h_ = fh.oracle_render(3, 7, 32, 0.01)
    assert w_ == 32 and h_ == 32 and len(rgb) == 32 * 32 * 3
    assert all(0.0 <= v <= 1.0 for v in rgb)
    assert min(rgb) < 0.99, "scene should darken some background pixels"

    print("facthash_py smoke test passed")


if __name__ == "__main__":
    main()

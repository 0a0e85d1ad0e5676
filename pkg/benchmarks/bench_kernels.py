"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Inputs are the default 25 cm / 28 GHz geometry (2209 elements, 2209 plane
pixels) and the 61 x 61 one-degree angle grid.
"""

import argparse
import timeit

import numpy as np

from cdoa import _kernels_py
from cdoa.aperture import ApertureConfig, build_elements, build_plane
from cdoa.dataset import AngleGrid
from cdoa.forward import direction_cosines

try:
    from cdoa import _kernels as compiled
except ImportError:
    compiled = None


def cases(batches):
    cfg = ApertureConfig()
    elements, plane = build_elements(cfg), build_plane(cfg)
    pairs = AngleGrid().pairs()
    u, v = direction_cosines(pairs[:, 0], pairs[:, 1])
    rng = np.random.default_rng(0)
    blob = rng.bytes(8 << 20)
    out = {"greens_matrix 2209x2209": lambda k: k.greens_matrix(elements, plane, cfg.k0)}
    for b in batches:
        p = rng.normal(size=(b, plane.shape[0])) + 1j * rng.normal(size=(b, plane.shape[0]))
        out[f"plane_wave_correlation B={b} G={len(u)}"] = (
            lambda k, p=p: k.plane_wave_correlation(p, plane[:, 1], plane[:, 2], u, v, cfg.k0))
    out["crc64 8 MiB"] = lambda k: k.crc64_update(0xFFFFFFFFFFFFFFFF, blob)
    out["min_distance"] = lambda k: k.min_distance(elements, plane)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--batch", type=int, nargs="+", default=[1, 16])
    args = ap.parse_args()
    backends = [("python", _kernels_py)] + ([("compiled", compiled)] if compiled else [])
    if compiled is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<44}" + "".join(f"{name:>12}" for name, _ in backends) + "     speedup")
    for label, fn in cases(args.batch).items():
        times = [min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat)) for _, k in backends]
        row = f"{label:<44}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times)
        if len(times) == 2:
            row += f"   {times[0] / times[1]:>8.2f}x"
        print(row)


if __name__ == "__main__":
    main()

"""Check that free propagation shears the Wigner function along x.

    python3 scripts/shear_check.py [--z 0.05] [--width 4e-4]

Propagates a top-hat slit by z, recomputes W and reports the worst
deviation from W_0(x - z k / k0, k) relative to the peak of W_0.
"""

import argparse

import numpy as np

from sagnac_wigner import FieldSpec, Grid, fresnel_propagate, make_state, wigner_transform


def shear_error(z: float, width: float, wavelength: float = 633e-9,
                n: int = 8192, dx: float = 3.2e-6) -> float:
    k0 = 2 * np.pi / wavelength
    grid = Grid(n=n, center=0.0, spacing=dx)
    s0 = make_state(FieldSpec("tophat", width=width), grid)
    sz = fresnel_propagate(s0, z, wavelength)
    # whole-sample shears keep the comparison free of interpolation
    shifts = np.arange(-40, 41)
    k = shifts * dx * k0 / z
    rows = np.arange(-150, 151, 5)
    pad = rows.max() + shifts.max()
    Wz = wigner_transform(sz, k, x=rows * dx).values
    W0 = wigner_transform(s0, k, x=np.arange(-pad, pad + 1) * dx)
    err = max(abs(Wz[i, j] - W0.values[r - s + pad, j])
              for i, r in enumerate(rows) for j, s in enumerate(shifts))
    return err / W0.peak()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--z", type=float, nargs="*", default=[0.01, 0.02, 0.05])
    ap.add_argument("--width", type=float, default=4e-4)
    args = ap.parse_args()
    for z in args.z:
        print(f"z = {z * 1e3:7.1f} mm   max shear error = {shear_error(z, args.width):.2e} peak")


if __name__ == "__main__":
    main()

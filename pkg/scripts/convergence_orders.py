"""Print the built-in mesh refinement studies.

The potential solve and the field-free transport advection both use
piecewise linear elements, so the L2 orders should sit near 2.
Equivalent to `bpdg convergence poisson` / `bpdg convergence transport`
but prints both and exits nonzero if either falls short.
"""
import math
import sys

from bpdg.device_config_io import poisson_orders, transport_orders


def show(name, rows, need):
    print(f"{name}:")
    ok = True
    for N, err, order in rows:
        tag = "" if math.isnan(order) else f"  order {order:.3f}"
        print(f"  N = {N:4d}  L2 error {err:.6e}{tag}")
        if not math.isnan(order) and order < need:
            ok = False
    print(f"  threshold {need}: {'ok' if ok else 'FAIL'}")
    return ok


def main():
    ok = show("potential solve", poisson_orders(), 1.9)
    ok &= show("transport advection", transport_orders(), 1.8)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())

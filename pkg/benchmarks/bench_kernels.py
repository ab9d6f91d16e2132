"""Compare the compiled and pure-Python annealing kernels on identical runs.

    python3 benchmarks/bench_kernels.py [--temps 20] [--repeat 3]

Both backends consume the same random stream, so besides the timings the
script checks that they return the same table.
"""
import argparse
import time

import numpy as np

from otnbr import kernels
from otnbr.decoder import ChannelSnrs
from otnbr.designer import AnnealSchedule, design_sa_table, design_structured
from otnbr.distortion import CostModel
from otnbr.quantizer import design_lloyd_max
from otnbr.topology import omarc, omcbr, otnbr23


def cases():
    q3 = design_lloyd_max(3)
    snrs = ChannelSnrs(-3.0, 10.0, 7.0)
    yield "table c3, omarc N=2 R=3", design_sa_table, CostModel(omarc(2), [q3, q3], 3, snrs, "c3")
    yield "table full, otnbr23 R=3", design_sa_table, CostModel(otnbr23(), [q3, q3], 3, snrs, "full")
    yield "table c3, omcbr N=3 Rr=5", design_sa_table, CostModel(omcbr(3), [q3] * 3, 5, snrs, "c3")
    yield "structured, omarc N=2 R=3", design_structured, CostModel(omarc(2), [q3, q3], 3, snrs, "full")


def best_time(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--temps", type=int, default=20, help="temperature levels per run")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    try:
        kernels.get_backend("cython")
    except ImportError:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")

    schedule = AnnealSchedule(seed=1, max_temps=args.temps, stall_levels=args.temps + 1)
    print(f"{'case':<28}{'cython [s]':>12}{'python [s]':>12}{'speedup':>10}  same result")
    for name, designer, model in cases():
        tc, rc = best_time(lambda: designer(model, schedule, backend="cython"), args.repeat)
        tp, rp = best_time(lambda: designer(model, schedule, backend="python"), args.repeat)
        table = getattr(rc.code, "table", None)
        same = (np.array_equal(table, rp.code.table) if table is not None
                else rc.code.assignments == rp.code.assignments)
        print(f"{name:<28}{tc:>12.3f}{tp:>12.3f}{tp / tc:>9.1f}x  {same}")


if __name__ == "__main__":
    main()

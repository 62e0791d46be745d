"""Compare the compiled and numpy refinement kernels, plus end-to-end fusion latency.

    python benchmarks/bench_kernels.py [--repetitions N] [--dim D] [--docs N]
"""

import argparse
import json

from fusion_forge.bench import bench_kernels, bench_methods, machine_info, synthetic_engine


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repetitions", type=int, default=50)
    ap.add_argument("--dim", type=int, default=128)
    ap.add_argument("--docs", type=int, default=200)
    ap.add_argument("--iterations", type=int, default=50)
    args = ap.parse_args()
    engine = synthetic_engine(n_docs=args.docs, dim=args.dim)
    out = {
        "machine": machine_info(),
        "refine_loop": bench_kernels(engine, args.repetitions, iterations=args.iterations),
        "fusion_stage": bench_methods(engine, args.repetitions),
    }
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()

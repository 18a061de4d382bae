"""Train the power-flow surrogate over the tabulated beta values and many seeds.

Generates a dataset, trains the table3 configuration for each beta x seed,
and writes a per-beta summary CSV (median/min/max final training MSE).  The
trend of interest: the steepest activation (beta for spin 5/2) should reach
the lowest median MSE.
"""

import argparse
import csv
import statistics
from dataclasses import replace
from pathlib import Path

from qnpflow.dataset import _arrays, fit_scaler, generate
from qnpflow.grid import load_network
from qnpflow.neuralnet import LayerTopology, TrainSet, preset, train


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--network", default="networks/paper4bus")
    ap.add_argument("--betas", type=float, nargs="+", default=[2.22, 2.78, 3.33, 4.1])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--n-samples", type=int, default=500)
    ap.add_argument("--dataset-seed", type=int, default=42)
    ap.add_argument("--preset", choices=["table3", "table4"], default="table3")
    ap.add_argument("--epochs", type=int, default=None)
    ap.add_argument("--out-dir", default="out/beta_sweep")
    args = ap.parse_args()

    net = load_network(args.network)
    samples, meta = generate(net, args.n_samples, seed=args.dataset_seed)
    x_raw, y_raw = _arrays([s for s in samples if s.converged])
    scaler = fit_scaler(x_raw, "minmax")
    data = TrainSet(x_train=scaler.transform(x_raw), y_train=y_raw)
    print(f"{meta.n_converged}/{meta.n_requested} samples converged")

    hyper0 = preset(args.preset)
    if args.epochs is not None:
        hyper0 = replace(hyper0, epochs=args.epochs)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for beta in args.betas:
        finals = []
        for seed in args.seeds:
            hyper = replace(hyper0, seed=seed)
            topology = LayerTopology(
                sizes=(x_raw.shape[1], *([hyper.hidden_size] * hyper.hidden_layers),
                       y_raw.shape[1]),
                beta=beta)
            _, report = train(data, topology, hyper)
            finals.append(report.final_train_mse)
        rows.append((beta, statistics.median(finals), min(finals), max(finals)))
        print(f"beta={beta:<5} median={rows[-1][1]:.3e} "
              f"min={rows[-1][2]:.3e} max={rows[-1][3]:.3e}")

    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beta", "median_final_mse", "min_final_mse", "max_final_mse"])
        for beta, med, lo, hi in rows:
            writer.writerow([beta, repr(med), repr(lo), repr(hi)])

    best = min(rows, key=lambda r: r[1])
    print(f"lowest median final MSE at beta={best[0]}")


if __name__ == "__main__":
    main()

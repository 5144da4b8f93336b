#!/usr/bin/env python3
"""Regenerate the committed fixture networks (deterministic for a given seed)."""

import argparse
import json
from pathlib import Path

import numpy as np


def layer(weights, bias, activation="relu"):
    return {
        "weights": [[float(v) for v in row] for row in np.asarray(weights)],
        "bias": [float(v) for v in np.asarray(bias)],
        "activation": activation,
    }


def network(input_dim, layers, **metadata):
    return {"version": 1, "input_dim": input_dim, "layers": layers, "metadata": {k: str(v) for k, v in metadata.items()}}


def digit_image(rng, side=28):
    # A ring-shaped stroke with a little noise, values in [0, 1].
    yy, xx = np.mgrid[0:side, 0:side]
    r = np.hypot(yy - side / 2 + 0.5, xx - side / 2 + 0.5)
    img = np.clip(1.0 - np.abs(r - side / 4) / 2.0, 0.0, 1.0)
    img += rng.uniform(0.0, 0.05, img.shape)
    return np.clip(img, 0.0, 1.0).ravel()


def sparse_mlp(rng, widths, nnz=12):
    """Sparse first layer over [0,1]^n; some units dead on the whole box."""
    layers = []
    n0 = widths[0]
    w = np.zeros((widths[1], n0))
    for i in range(widths[1]):
        idx = rng.choice(n0, size=nnz, replace=False)
        w[i, idx] = rng.normal(0.0, 0.6, nnz)
    b = rng.normal(0.0, 0.3, widths[1])
    b[-1] = -np.clip(w[-1], 0, None).sum() - 0.5  # stably inactive on [0,1]^n
    layers.append(layer(w, b))
    for l in range(2, len(widths) - 1):
        w = rng.normal(0.0, 0.7, (widths[l], widths[l - 1]))
        b = rng.normal(0.0, 0.3, widths[l])
        layers.append(layer(w, b))
    w = rng.normal(0.0, 0.7, (widths[-1], widths[-2]))
    layers.append(layer(w, rng.normal(0.0, 0.1, widths[-1]), "identity"))
    return layers


def dense_mlp(rng, widths):
    layers = []
    for l in range(1, len(widths)):
        act = "relu" if l < len(widths) - 1 else "identity"
        layers.append(layer(rng.normal(0.0, 1.0, (widths[l], widths[l - 1])), rng.normal(0.0, 0.5, widths[l]), act))
    return layers


def forced_stable(rng):
    """[2,4,4,2] on [-1,1]^2 with dead, active and dependent active units."""
    w1 = rng.normal(0.0, 1.0, (4, 2))
    b1 = rng.normal(0.0, 0.3, 4)
    b1[1] = -np.abs(w1[1]).sum() - 1.0  # dead
    b1[2] = np.abs(w1[2]).sum() + 1.0  # always on
    w1[3] = 0.5 * w1[2]  # dependent on unit 3
    b1[3] = np.abs(w1[3]).sum() + 1.0
    w2 = rng.normal(0.0, 1.0, (4, 4))
    b2 = rng.normal(0.0, 0.3, 4)
    b2[0] = -20.0  # dead
    w3 = rng.normal(0.0, 1.0, (2, 4))
    return [layer(w1, b1), layer(w2, b2), layer(w3, rng.normal(0.0, 0.1, 2), "identity")]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "fixtures")
    ap.add_argument("--seed", type=int, default=20201014)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)

    files = {
        "mlp_784_5_5_5_10.json": network(784, sparse_mlp(rng, [784, 5, 5, 5, 10]), name="synthetic sparse mlp", seed=args.seed),
        "center_784.json": {"center": [float(v) for v in digit_image(rng)]},
        "tiny_2_2_1.json": network(2, dense_mlp(rng, [2, 2, 1]), name="tiny"),
        "tiny_2_2_2_1.json": network(2, dense_mlp(rng, [2, 2, 2, 1]), name="tiny deep"),
        "forced_stable_2_4_4_2.json": network(2, forced_stable(rng), name="forced stable"),
        "abs_1_2_1.json": network(1, [layer([[1.0], [-1.0]], [0.0, 0.0]), layer([[1.0, 1.0]], [0.0], "identity")], name="abs"),
    }
    for name, doc in files.items():
        (args.out / name).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()

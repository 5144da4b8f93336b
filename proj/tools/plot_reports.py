#!/usr/bin/env python3
"""Plot the CSV outputs of `reluforge bounds`, `regions` and `local-stability`."""

import argparse
import csv
import sys

SCHEMAS = {
    "bounds": ["layer", "width", "stably_inactive", "stably_active", "unstable"],
    "local-stability": ["delta", "stably_inactive", "stably_active", "patterns", "complete"],
    "regions-alpha": ["alpha", "stably_inactive", "stably_active", "patterns", "complete", "time_s"],
    "regions-domain": ["domain", "stably_inactive", "stably_active", "patterns", "complete", "time_s"],
}


def load(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    for kind, cols in SCHEMAS.items():
        if header == cols:
            break
    else:
        raise ValueError(f"{path}: unrecognised header {header}")
    records = []
    for n, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{n}: expected {len(header)} fields, got {len(row)}")
        rec = {}
        for key, value in zip(header, row):
            if key == "domain":
                rec[key] = value
            elif key == "complete":
                if value not in ("true", "false"):
                    raise ValueError(f"{path}:{n}: complete must be true or false")
                rec[key] = value == "true"
            else:
                rec[key] = float(value)
        records.append(rec)
    return kind, records


def check_shape(kind, records):
    """Sweeps must be monotone: more patterns and fewer stable units as the box grows."""
    problems = []
    if kind in ("local-stability", "regions-alpha"):
        x = "delta" if kind == "local-stability" else "alpha"
        ordered = sorted(records, key=lambda r: r[x])
        for a, b in zip(ordered, ordered[1:]):
            if not (a["complete"] and b["complete"]):
                continue
            if b["patterns"] < a["patterns"]:
                problems.append(f"patterns decrease between {x}={a[x]} and {x}={b[x]}")
            if b["stably_inactive"] + b["stably_active"] > a["stably_inactive"] + a["stably_active"]:
                problems.append(f"stable units increase between {x}={a[x]} and {x}={b[x]}")
    return problems


def plot(kind, records, out):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    if kind == "bounds":
        layers = [int(r["layer"]) for r in records]
        inactive = [r["stably_inactive"] for r in records]
        active = [r["stably_active"] for r in records]
        unstable = [r["unstable"] for r in records]
        ax.bar(layers, inactive, label="stably inactive")
        ax.bar(layers, active, bottom=inactive, label="stably active")
        ax.bar(layers, unstable, bottom=[a + b for a, b in zip(inactive, active)], label="unstable")
        ax.set_xlabel("hidden layer")
        ax.set_ylabel("units")
    elif kind == "regions-domain":
        ax.bar([r["domain"] for r in records], [r["patterns"] for r in records])
        ax.set_ylabel("activation patterns")
    else:
        x = "delta" if kind == "local-stability" else "alpha"
        ordered = sorted(records, key=lambda r: r[x])
        xs = [r[x] for r in ordered]
        ax.plot(xs, [r["stably_inactive"] for r in ordered], "o-", label="stably inactive")
        ax.plot(xs, [r["stably_active"] for r in ordered], "s-", label="stably active")
        ax.set_xlabel(x)
        ax.set_ylabel("units")
        positive = [v for v in xs if v > 0]
        if positive and len(positive) == len(xs):
            ax.set_xscale("log")
        elif positive:
            ax.set_xscale("symlog", linthresh=min(positive))
        twin = ax.twinx()
        twin.plot(xs, [r["patterns"] for r in ordered], "k^--", label="patterns")
        twin.set_ylabel("activation patterns")
        twin.legend(loc="upper right")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(out)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", nargs="+", help="CSV files written by the reluforge CLI")
    parser.add_argument("--check", action="store_true", help="validate schema and sweep shape, no plotting")
    parser.add_argument("--out", help="output image; with several inputs, the input name is appended")
    args = parser.parse_args(argv)

    status = 0
    for path in args.csv:
        try:
            kind, records = load(path)
        except (OSError, ValueError) as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        problems = check_shape(kind, records)
        for p in problems:
            print(f"{path}: {p}", file=sys.stderr)
        status = max(status, 1 if problems else 0)
        if args.check:
            print(f"{path}: {kind}, {len(records)} rows, {'ok' if not problems else 'shape violated'}")
            continue
        out = args.out or path.rsplit(".", 1)[0] + ".png"
        if args.out and len(args.csv) > 1:
            stem = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
            out = args.out.rsplit(".", 1)[0] + "_" + stem + ".png"
        plot(kind, records, out)
        print(f"wrote {out}")
    return status


if __name__ == "__main__":
    sys.exit(main())

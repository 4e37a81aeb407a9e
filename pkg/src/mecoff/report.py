"""Post-processing of sweep CSVs: aggregate tables and figures.

Everything here derives from raw result rows; nothing feeds back into the
simulation paths.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import ResultRow, summarize

SCHEME_LABELS = {
    "dm_mmco": "DM-MMCO",
    "local_only": "Local-only",
    "op_mmse": "OP-MMSE",
    "fdma": "FDMA",
    "tdma": "TDMA",
}

PARAM_LABELS = {
    "num_devices": "number of devices",
    "tau_max": "deadline tau_max (s)",
}


def write_aggregate_table(summary: list[dict], path: str) -> None:
    """Gnuplot-friendly table: one indexed block per (param, scheme) pair."""
    blocks: dict[tuple[str, str], list[dict]] = {}
    for entry in summary:
        blocks.setdefault((entry["sweep_param"], entry["scheme"]), []).append(entry)
    with open(path, "w", newline="") as fh:
        fh.write("# columns: sweep_value mean_energy_j energy_ci95 "
                 "mean_max_delay_s mean_weighted_cost feasible_fraction trials\n")
        for index, key in enumerate(sorted(blocks)):
            param, scheme = key
            fh.write(f"# index {index}: param={param} scheme={scheme}\n")
            for e in sorted(blocks[key], key=lambda d: d["sweep_value"]):
                fh.write(
                    f"{e['sweep_value']:.9g} {e['mean_energy_j']:.9g} "
                    f"{e['energy_ci95']:.9g} {e['mean_max_delay_s']:.9g} "
                    f"{e['mean_weighted_cost']:.9g} {e['feasible_fraction']:.9g} "
                    f"{e['trials']}\n"
                )
            fh.write("\n\n")


def _plot_metric(summary, param, metric, err_key, ylabel, path, logy=False):
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    schemes = sorted({e["scheme"] for e in summary if e["sweep_param"] == param})
    for scheme in schemes:
        pts = sorted(
            (e for e in summary if e["sweep_param"] == param and e["scheme"] == scheme),
            key=lambda e: e["sweep_value"],
        )
        xs = [e["sweep_value"] for e in pts]
        ys = [e[metric] for e in pts]
        if err_key is not None:
            errs = [e[err_key] for e in pts]
            ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3,
                        label=SCHEME_LABELS.get(scheme, scheme))
        else:
            ax.plot(xs, ys, marker="o", label=SCHEME_LABELS.get(scheme, scheme))
    ax.set_xlabel(PARAM_LABELS.get(param, param))
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report(rows: list[ResultRow], outdir: str) -> list[str]:
    """Aggregate table plus energy/delay figures for every swept parameter."""
    os.makedirs(outdir, exist_ok=True)
    summary = summarize(rows)
    written = []
    table_path = os.path.join(outdir, "aggregate.dat")
    write_aggregate_table(summary, table_path)
    written.append(table_path)
    for param in sorted({e["sweep_param"] for e in summary}):
        energy_path = os.path.join(outdir, f"energy_vs_{param}.png")
        _plot_metric(summary, param, "mean_energy_j", "energy_ci95",
                     "mean total energy (J)", energy_path, logy=True)
        written.append(energy_path)
        delay_path = os.path.join(outdir, f"max_delay_vs_{param}.png")
        _plot_metric(summary, param, "mean_max_delay_s", None,
                     "mean worst-case delay (s)", delay_path)
        written.append(delay_path)
    return written

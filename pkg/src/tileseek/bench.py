"""Scan-latency benchmark: per-query timings, percentiles, report artifacts.

The report path writes machine-readable JSON plus a latencies CSV and a
matplotlib histogram, so runs can be archived and compared.
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path
from typing import List, Union

import numpy as np

from . import rng, search
from .store import Corpus


def run_bench(
    corpus: Corpus,
    model_id: str,
    n_queries: int = 100,
    k: int = 5,
    seed: int = 0,
    workers: int = 4,
) -> dict:
    """Time sequential and chunk-parallel scans; verify they rank identically."""
    table = corpus.table(model_id)
    block = table.block
    dim = block.vectors.shape[1]
    queries = [
        search.QueryVector(
            model_id, rng.unit_vector(rng.derive_state(b"tileseek-bench", rng.key_bytes(seed, i)), dim)
        )
        for i in range(n_queries)
    ]
    block.norms  # warm the norm cache so timings measure the scan itself

    seq_ms: List[float] = []
    par_ms: List[float] = []
    deterministic = True
    for q in queries:
        t0 = time.perf_counter()
        seq = search.top_k(block, q, k)
        seq_ms.append((time.perf_counter() - t0) * 1000.0)
        t0 = time.perf_counter()
        par = search.parallel_top_k(block, q, k, workers=workers)
        par_ms.append((time.perf_counter() - t0) * 1000.0)
        if [(t.cell, t.rank) for t in seq] != [(t.cell, t.rank) for t in par]:
            deterministic = False

    def stats(samples: List[float]) -> dict:
        arr = np.asarray(samples)
        return {
            "p50_ms": float(np.percentile(arr, 50)),
            "p95_ms": float(np.percentile(arr, 95)),
            "mean_ms": float(arr.mean()),
            "min_ms": float(arr.min()),
            "max_ms": float(arr.max()),
        }

    seq_stats = stats(seq_ms)
    par_stats = stats(par_ms)
    return {
        "model_id": model_id,
        "records": len(block),
        "dim": dim,
        "dtype": str(block.vectors.dtype),
        "queries": n_queries,
        "k": k,
        "workers": workers,
        "sequential": seq_stats,
        "parallel": par_stats,
        "speedup_p50": seq_stats["p50_ms"] / max(par_stats["p50_ms"], 1e-9),
        "throughput_qps": 1000.0 / max(seq_stats["mean_ms"], 1e-9),
        "deterministic_across_parallelism": deterministic,
        "samples_ms": {"sequential": seq_ms, "parallel": par_ms},
    }


def write_report(report: dict, report_dir: Union[str, Path]) -> List[Path]:
    """bench.json + latencies.csv + latency_hist.png under report_dir."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    report_dir = Path(report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = report_dir / "bench.json"
    json_path.write_text(json.dumps(report, indent=2) + "\n")
    written.append(json_path)

    csv_path = report_dir / "latencies.csv"
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["query", "sequential_ms", "parallel_ms"])
        for i, (s, p) in enumerate(
            zip(report["samples_ms"]["sequential"], report["samples_ms"]["parallel"])
        ):
            writer.writerow([i, f"{s:.4f}", f"{p:.4f}"])
    written.append(csv_path)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(report["samples_ms"]["sequential"], bins=30, alpha=0.6, label="sequential")
    ax.hist(report["samples_ms"]["parallel"], bins=30, alpha=0.6, label=f"{report['workers']} workers")
    ax.axvline(report["sequential"]["p95_ms"], color="k", linestyle="--", linewidth=1, label="seq p95")
    ax.set_xlabel("scan latency (ms)")
    ax.set_ylabel("queries")
    ax.set_title(
        f"{report['model_id']}: {report['records']} records x dim {report['dim']} ({report['dtype']})"
    )
    ax.legend()
    fig.tight_layout()
    png_path = report_dir / "latency_hist.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    written.append(png_path)
    return written

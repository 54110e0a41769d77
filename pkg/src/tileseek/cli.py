"""Operator entry points: synthesize, verify, query, serve, bench.

Exit codes: 0 success, 1 validation/data error, 2 usage error.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path
from typing import Optional, Tuple

import click
import numpy as np

from . import search
from .bench import run_bench, write_report
from .encoder import QueryResolver, QuerySpec
from .errors import TileseekError
from .grid import GeoPoint, GridSpec, cell_center, cell_id_string, parse_cell_id
from .mapview import RasterSpec, bin_arrays, export_geojson, render_png
from .models import Registry
from .service import ServiceConfig, create_app
from .store import Corpus, synth_corpus, validate_corpus


@click.group()
def main():
    """Search gridded satellite-image embeddings from the command line."""


def _parse_bbox(text: Optional[str]) -> Optional[Tuple[float, float, float, float]]:
    if text is None:
        return None
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise click.UsageError("--bbox wants 'lat_min,lat_max,lon_min,lon_max'")
    lat_min, lat_max, lon_min, lon_max = map(float, parts)
    if lat_min > lat_max or lon_min > lon_max:
        raise click.UsageError("--bbox bounds are inverted")
    return lat_min, lat_max, lon_min, lon_max


@main.command()
@click.option("--cells", "cell_limit", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--smooth", is_flag=True, help="Blend the mock location field so neighbors correlate.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["eesh1", "parquet"]), default="eesh1",
              show_default=True)
@click.option("--registry", "registry_path", type=click.Path(exists=True), default=None)
@click.option("--stride", type=int, default=3, show_default=True)
@click.option("--cell-size-km", type=float, default=10.0, show_default=True)
@click.option("--bbox", default=None, help="Restrict cells to lat_min,lat_max,lon_min,lon_max.")
@click.option("--row-group-size", type=int, default=1024, show_default=True)
@click.option("--shard-size", type=int, default=100_000, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def synth(cell_limit, seed, smooth, out_dir, fmt, registry_path, stride, cell_size_km, bbox,
          row_group_size, shard_size, as_json):
    """Write a deterministic synthetic corpus for every registry model."""
    registry = Registry.from_manifest(registry_path) if registry_path else Registry.default()
    spec = GridSpec(cell_size_km=cell_size_km, subsample_stride=stride)
    try:
        manifest = synth_corpus(
            spec, registry, seed, cell_limit, out_dir,
            smooth=smooth, fmt=fmt, row_group_size=row_group_size, shard_size=shard_size,
            bbox=_parse_bbox(bbox),
        )
    except TileseekError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    if as_json:
        click.echo(json.dumps({"out": str(out_dir), "total_records": manifest.total_records,
                               "shards": len(manifest.shards)}))
    else:
        click.echo(f"wrote corpus to {out_dir}")
        for model_id, total in sorted(manifest.total_records.items()):
            click.echo(f"  {model_id}: {total} records")


@main.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True),
              envvar="CORPUS_MANIFEST")
@click.option("--json", "as_json", is_flag=True)
def verify(corpus_dir, as_json):
    """Check shard checksums, manifest closure, and dim/dtype consistency."""
    report = validate_corpus(corpus_dir)
    if as_json:
        click.echo(json.dumps(report, indent=2))
    else:
        click.echo(f"checked {report['checked_shards']} shards")
        for p in report["problems"]:
            where = f" [{p['shard']}]" if p["shard"] else ""
            click.echo(f"  {p['code']}{where}: {p['message']}")
        click.echo("ok" if report["ok"] else "FAILED")
    sys.exit(0 if report["ok"] else 1)


@main.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True),
              envvar="CORPUS_MANIFEST")
@click.option("--model", "model_id", required=True)
@click.option("--text", default=None, help="Text prompt query.")
@click.option("--cell", default=None, help="Image query by corpus cell id, e.g. R-45C1296.")
@click.option("--location", default=None, help='Location query "lat,lon" (use --location=LAT,LON).')
@click.option("--raw", "raw_file", type=click.Path(exists=True), default=None,
              help="Raw vector file (.json list or .npy).")
@click.option("--k", type=int, default=5, show_default=True)
@click.option("--fraction", type=float, default=0.025, show_default=True)
@click.option("--map", "map_path", type=click.Path(), default=None,
              help="Write the similarity map PNG here.")
@click.option("--geojson", "geojson_path", type=click.Path(), default=None,
              help="Write the top-k features here.")
@click.option("--csv", "csv_path", type=click.Path(), default=None,
              help="Write the rank table as CSV.")
@click.option("--encoder-mode", type=click.Choice(["mock", "remote", "proxy"]), default=None,
              envvar="ENCODER_MODE",
              help="Defaults to proxy for --location, mock otherwise.")
@click.option("--encoder-url", default=None, envvar="ENCODER_URL")
@click.option("--seed", type=int, default=0, show_default=True, help="Mock encoder seed.")
@click.option("--registry", "registry_path", type=click.Path(exists=True), default=None,
              envvar="REGISTRY")
@click.option("--json", "as_json", is_flag=True)
def query(corpus_dir, model_id, text, cell, location, raw_file, k, fraction, map_path,
          geojson_path, csv_path, encoder_mode, encoder_url, seed, registry_path, as_json):
    """Run one query and print a rank table; optionally write map/geojson/csv."""
    chosen = [name for name, value in
              [("--text", text), ("--cell", cell), ("--location", location), ("--raw", raw_file)]
              if value is not None]
    if len(chosen) != 1:
        raise click.UsageError(f"give exactly one of --text/--cell/--location/--raw (got {chosen})")

    if text is not None:
        qspec = QuerySpec("text", text, model_id)
    elif cell is not None:
        qspec = QuerySpec("image_cell", parse_cell_id_or_usage(cell), model_id)
    elif location is not None:
        try:
            lat_s, lon_s = location.split(",")
            point = GeoPoint(float(lat_s), float(lon_s))
        except ValueError as e:
            raise click.UsageError(f'--location wants "lat,lon": {e}')
        qspec = QuerySpec("location", point, model_id)
    else:
        path = Path(raw_file)
        if path.suffix == ".npy":
            values = np.load(path)
        else:
            values = np.asarray(json.loads(path.read_text()), dtype=np.float32)
        qspec = QuerySpec("raw", values, model_id)

    if encoder_mode is None:
        encoder_mode = "proxy" if location is not None else "mock"

    try:
        registry = Registry.from_manifest(registry_path) if registry_path else Registry.default()
        corpus = Corpus.load(corpus_dir)
        resolver = QueryResolver(corpus=corpus, registry=registry, mode=encoder_mode,
                                 encoder_url=encoder_url, mock_seed=seed)
        qvec = resolver.resolve(qspec)
        table = corpus.table(model_id)
        scores = search.score_all(table.block, qvec)
        top = search.top_k_from_scores(table.block, scores, k)
        mask_size = search.fraction_k(fraction, len(table))

        rows = []
        for t in top:
            center = cell_center(corpus.grid_spec, t.cell)
            rows.append({"rank": t.rank, "cell_id": cell_id_string(t.cell),
                         "lat": center.lat, "lon": center.lon, "score": t.score})

        if map_path:
            raster = bin_arrays(table.lat, table.lon, scores,
                                RasterSpec(), aggregator="max")
            Path(map_path).write_bytes(render_png(raster))
        if geojson_path:
            Path(geojson_path).write_text(export_geojson(top, corpus.grid_spec, model_id))
        if csv_path:
            with open(csv_path, "w", newline="") as f:
                writer = csv.DictWriter(f, fieldnames=["rank", "cell_id", "lat", "lon", "score"])
                writer.writeheader()
                writer.writerows(rows)
    except TileseekError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)

    if as_json:
        click.echo(json.dumps({"model_id": model_id, "mask_size": mask_size, "results": rows}))
    else:
        click.echo(f"{'rank':>4}  {'cell_id':<14} {'lat':>10} {'lon':>11} {'score':>9}")
        for r in rows:
            click.echo(f"{r['rank']:>4}  {r['cell_id']:<14} {r['lat']:>10.4f} "
                       f"{r['lon']:>11.4f} {r['score']:>9.6f}")
        click.echo(f"mask size at fraction {fraction}: {mask_size} of {len(table)}")


def parse_cell_id_or_usage(text: str):
    try:
        return parse_cell_id(text)
    except TileseekError as e:
        raise click.UsageError(str(e))


@main.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True),
              envvar="CORPUS_MANIFEST")
@click.option("--bind", default="127.0.0.1:8000", show_default=True, envvar="BIND")
@click.option("--registry", "registry_path", type=click.Path(exists=True), default=None,
              envvar="REGISTRY")
@click.option("--encoder-mode", type=click.Choice(["mock", "remote", "proxy"]), default="mock",
              show_default=True, envvar="ENCODER_MODE")
@click.option("--encoder-url", default=None, envvar="ENCODER_URL")
@click.option("--cache-capacity", type=int, default=256, show_default=True, envvar="CACHE_CAPACITY")
@click.option("--raster-width", type=int, default=1440, show_default=True, envvar="RASTER_WIDTH")
@click.option("--raster-height", type=int, default=720, show_default=True, envvar="RASTER_HEIGHT")
@click.option("--cors-origin", "cors_origins", multiple=True)
def serve(corpus_dir, bind, registry_path, encoder_mode, encoder_url, cache_capacity,
          raster_width, raster_height, cors_origins):
    """Start the HTTP service; readiness is reflected in /healthz."""
    import uvicorn

    try:
        host, _, port_s = bind.rpartition(":")
        port = int(port_s)
        if not host:
            raise ValueError("missing host")
    except ValueError as e:
        raise click.UsageError(f"--bind wants host:port, got {bind!r}: {e}")

    try:
        corpus = Corpus.load(corpus_dir)
    except TileseekError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    config = ServiceConfig(
        corpus_manifest=str(corpus_dir),
        registry_path=registry_path,
        encoder_mode=encoder_mode,
        encoder_url=encoder_url,
        cache_capacity=cache_capacity,
        raster_width=raster_width,
        raster_height=raster_height,
        cors_origins=list(cors_origins),
    )
    app = create_app(config, corpus=corpus)
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    except SystemExit:
        raise
    except OSError as e:
        click.echo(f"error: cannot bind {bind}: {e}", err=True)
        sys.exit(1)


@main.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True),
              envvar="CORPUS_MANIFEST")
@click.option("--model", "model_id", default=None, help="Defaults to the first corpus model.")
@click.option("--queries", type=int, default=100, show_default=True)
@click.option("--k", type=int, default=5, show_default=True)
@click.option("--workers", type=int, default=4, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--report-dir", type=click.Path(), default=None,
              help="Also write bench.json, latencies.csv, and a histogram PNG.")
def bench(corpus_dir, model_id, queries, k, workers, seed, report_dir):
    """Measure scan latency; prints the JSON report."""
    try:
        corpus = Corpus.load(corpus_dir)
        model_id = model_id or corpus.model_ids()[0]
        report = run_bench(corpus, model_id, n_queries=queries, k=k, seed=seed, workers=workers)
    except TileseekError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    if report_dir:
        for path in write_report(report, report_dir):
            click.echo(f"wrote {path}", err=True)
    click.echo(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()

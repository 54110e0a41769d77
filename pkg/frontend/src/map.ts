import { feature } from "topojson-client";
import type { Topology, GeometryCollection } from "topojson-specification";
import landTopo from "world-atlas/land-110m.json";

import { lonLatToCanvas } from "./projection";
import type { ResultTile } from "./types";

type Ring = [number, number][];

let landRings: Ring[] | null = null;

/** Coastline rings from the bundled low-resolution land dataset. */
export function getLandRings(): Ring[] {
  if (landRings) return landRings;
  const topo = landTopo as unknown as Topology<{ land: GeometryCollection }>;
  const land = feature(topo, topo.objects.land);
  const rings: Ring[] = [];
  for (const f of land.features) {
    const geom = f.geometry;
    if (geom.type === "Polygon") {
      for (const ring of geom.coordinates) rings.push(ring as Ring);
    } else if (geom.type === "MultiPolygon") {
      for (const poly of geom.coordinates) for (const ring of poly) rings.push(ring as Ring);
    }
  }
  landRings = rings;
  return rings;
}

export interface MapLayers {
  overlay: HTMLImageElement | null;
  overlayOpacity: number;
  pins: ResultTile[];
  clicked: { lat: number; lon: number } | null;
}

export function drawMap(canvas: HTMLCanvasElement, layers: MapLayers): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;

  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, width, height);

  // graticule every 30 degrees
  ctx.strokeStyle = "rgba(255, 255, 255, 0.08)";
  ctx.lineWidth = 1;
  ctx.beginPath();
  for (let lon = -180; lon <= 180; lon += 30) {
    const [x] = lonLatToCanvas(0, lon, width, height);
    ctx.moveTo(x, 0);
    ctx.lineTo(x, height);
  }
  for (let lat = -60; lat <= 60; lat += 30) {
    const [, y] = lonLatToCanvas(lat, 0, width, height);
    ctx.moveTo(0, y);
    ctx.lineTo(width, y);
  }
  ctx.stroke();

  ctx.strokeStyle = "rgba(200, 210, 225, 0.65)";
  ctx.lineWidth = 1;
  ctx.beginPath();
  for (const ring of getLandRings()) {
    ring.forEach(([lon, lat], i) => {
      const [x, y] = lonLatToCanvas(lat, lon, width, height);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.closePath();
  }
  ctx.stroke();

  if (layers.overlay) {
    ctx.globalAlpha = layers.overlayOpacity;
    ctx.drawImage(layers.overlay, 0, 0, width, height);
    ctx.globalAlpha = 1;
  }

  for (const tile of layers.pins) {
    const [x, y] = lonLatToCanvas(tile.lat, tile.lon, width, height);
    ctx.beginPath();
    ctx.arc(x, y, tile.rank === 1 ? 6 : 4, 0, Math.PI * 2);
    ctx.fillStyle = tile.rank === 1 ? "#ffd166" : "#ef476f";
    ctx.fill();
    ctx.strokeStyle = "#10141c";
    ctx.stroke();
    ctx.fillStyle = "#ffffff";
    ctx.font = "11px system-ui, sans-serif";
    ctx.fillText(String(tile.rank), x + 7, y + 4);
  }

  if (layers.clicked) {
    const [x, y] = lonLatToCanvas(layers.clicked.lat, layers.clicked.lon, width, height);
    ctx.strokeStyle = "#06d6a0";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(x - 7, y);
    ctx.lineTo(x + 7, y);
    ctx.moveTo(x, y - 7);
    ctx.lineTo(x, y + 7);
    ctx.stroke();
  }
}

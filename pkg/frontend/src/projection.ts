/** Equirectangular mapping between the map canvas and lat/lon, matching the
 * service's raster frame: lon [-180, 180) -> x [0, w), lat 90..-90 -> y 0..h. */

export interface LonLat {
  lat: number;
  lon: number;
}

export function lonLatToCanvas(
  lat: number,
  lon: number,
  width: number,
  height: number,
): [number, number] {
  const x = ((lon + 180) / 360) * width;
  const y = ((90 - lat) / 180) * height;
  return [x, y];
}

/** Inverse mapping for click handling; null for points outside the canvas. */
export function canvasToLonLat(
  x: number,
  y: number,
  width: number,
  height: number,
): LonLat | null {
  if (x < 0 || y < 0 || x >= width || y >= height) return null;
  const lon = (x / width) * 360 - 180;
  const lat = 90 - (y / height) * 180;
  return { lat, lon };
}

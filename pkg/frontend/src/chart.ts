/**
 * Spectrum overlay chart: wavelength vs intensity as inline SVG, one polyline
 * per stored spectrum, colored by label. Rendering never mutates the records;
 * when a view holds more than MAX_FULL_RESOLUTION_OVERLAYS spectra the
 * polylines are thinned for display only.
 */

import type { SpectrumRecord } from './types.js';

export const MAX_FULL_RESOLUTION_OVERLAYS = 20;
export const DOWNSAMPLED_POINTS = 96;

const PALETTE = [
  '#2563eb', '#dc2626', '#16a34a', '#9333ea', '#ea580c',
  '#0891b2', '#ca8a04', '#db2777', '#4d7c0f', '#7c3aed',
];

export function colorForLabel(label: string, orderedLabels: string[]): string {
  const index = Math.max(0, orderedLabels.indexOf(label));
  return PALETTE[index % PALETTE.length] as string;
}

export interface ChartSeries {
  label: string;
  color: string;
  points: Array<[number, number]>;
}

export interface PreparedChart {
  series: ChartSeries[];
  labels: string[];
  downsampled: boolean;
  xRange: [number, number];
  yRange: [number, number];
}

function thin(points: Array<[number, number]>, target: number): Array<[number, number]> {
  if (points.length <= target) return points;
  const step = Math.ceil(points.length / target);
  const out: Array<[number, number]> = [];
  for (let i = 0; i < points.length; i += step) out.push(points[i] as [number, number]);
  const last = points[points.length - 1] as [number, number];
  if (out[out.length - 1] !== last) out.push(last);
  return out;
}

export function prepareChart(records: SpectrumRecord[]): PreparedChart {
  const labels = [...new Set(records.map((r) => r.label))].sort();
  const downsampled = records.length > MAX_FULL_RESOLUTION_OVERLAYS;
  let xMin = Infinity;
  let xMax = -Infinity;
  let yMin = Infinity;
  let yMax = -Infinity;
  const series = records.map((record) => {
    const { wavelengths_nm: wl, intensities } = record.spectrum;
    let points = wl.map((w, i) => [w, intensities[i] as number] as [number, number]);
    if (downsampled) points = thin(points, DOWNSAMPLED_POINTS);
    for (const [x, y] of points) {
      if (x < xMin) xMin = x;
      if (x > xMax) xMax = x;
      if (y < yMin) yMin = y;
      if (y > yMax) yMax = y;
    }
    return { label: record.label, color: colorForLabel(record.label, labels), points };
  });
  if (!Number.isFinite(xMin)) {
    xMin = 0; xMax = 1; yMin = 0; yMax = 1;
  }
  if (yMin === yMax) {
    yMin -= 0.5; yMax += 0.5;
  }
  return { series, labels, downsampled, xRange: [xMin, xMax], yRange: [yMin, yMax] };
}

export interface ChartOptions {
  width?: number;
  height?: number;
  padding?: number;
}

export function renderChartSvg(records: SpectrumRecord[], opts: ChartOptions = {}): string {
  const width = opts.width ?? 640;
  const height = opts.height ?? 280;
  const pad = opts.padding ?? 36;
  const chart = prepareChart(records);
  const [xMin, xMax] = chart.xRange;
  const [yMin, yMax] = chart.yRange;
  const sx = (x: number) => pad + ((x - xMin) / (xMax - xMin || 1)) * (width - 2 * pad);
  const sy = (y: number) => height - pad - ((y - yMin) / (yMax - yMin || 1)) * (height - 2 * pad);

  const polylines = chart.series
    .map((s) => {
      const pts = s.points.map(([x, y]) => `${sx(x).toFixed(1)},${sy(y).toFixed(1)}`).join(' ');
      return `<polyline fill="none" stroke="${s.color}" stroke-width="1" opacity="0.8" points="${pts}"><title>${escapeXml(s.label)}</title></polyline>`;
    })
    .join('');
  const legend = chart.labels
    .map((label, i) => {
      const color = colorForLabel(label, chart.labels);
      return `<g transform="translate(${pad + i * 120}, 14)"><rect width="10" height="10" fill="${color}"/><text x="14" y="9" font-size="11">${escapeXml(label)}</text></g>`;
    })
    .join('');
  const note = chart.downsampled
    ? `<text x="${width - pad}" y="14" text-anchor="end" font-size="10" fill="#666">display downsampled</text>`
    : '';
  const axes = `
    <line x1="${pad}" y1="${height - pad}" x2="${width - pad}" y2="${height - pad}" stroke="#999"/>
    <line x1="${pad}" y1="${pad}" x2="${pad}" y2="${height - pad}" stroke="#999"/>
    <text x="${pad}" y="${height - pad + 14}" font-size="10">${xMin.toFixed(0)} nm</text>
    <text x="${width - pad}" y="${height - pad + 14}" text-anchor="end" font-size="10">${xMax.toFixed(0)} nm</text>
    <text x="${pad - 4}" y="${height - pad}" text-anchor="end" font-size="10">${yMin.toFixed(2)}</text>
    <text x="${pad - 4}" y="${pad + 4}" text-anchor="end" font-size="10">${yMax.toFixed(2)}</text>`;
  return `<svg viewBox="0 0 ${width} ${height}" xmlns="http://www.w3.org/2000/svg" role="img" aria-label="spectrum chart">${axes}${legend}${note}${polylines}</svg>`;
}

function escapeXml(text: string): string {
  return text
    .replaceAll('&', '&amp;')
    .replaceAll('<', '&lt;')
    .replaceAll('>', '&gt;')
    .replaceAll('"', '&quot;');
}

/**
 * Client-side pre-flight checks for the bulk CSV format
 * (`wavelength_nm,<label1>,<label2>,...`; one column per spectrum, one
 * wavelength per row). The server re-validates authoritatively; this exists
 * so operators see rejected rows with reasons before uploading.
 */

export interface CsvRowError {
  row: number; // 1-based line number including the header
  message: string;
}

export interface CsvPreview {
  labels: string[];
  rowCount: number;
  errors: CsvRowError[];
  /** parsed numeric rows: [wavelength, ...one intensity per label] */
  rows: number[][];
}

export const CSV_HEADER_FIRST = 'wavelength_nm';

export function parseCsvPreview(text: string): CsvPreview {
  const lines = text.split(/\r\n|\r|\n/);
  const errors: CsvRowError[] = [];
  const rows: number[][] = [];

  const headerLine = lines[0]?.trim();
  if (!headerLine) {
    return { labels: [], rowCount: 0, errors: [{ row: 1, message: 'empty document' }], rows };
  }
  const header = headerLine.split(',').map((cell) => cell.trim());
  if (header[0] !== CSV_HEADER_FIRST) {
    errors.push({ row: 1, message: `header must start with '${CSV_HEADER_FIRST}'` });
    return { labels: [], rowCount: 0, errors, rows };
  }
  const labels = header.slice(1);
  if (labels.length === 0) {
    errors.push({ row: 1, message: 'no spectrum columns' });
    return { labels, rowCount: 0, errors, rows };
  }
  labels.forEach((label, i) => {
    if (!label) errors.push({ row: 1, message: `column ${i + 2} has an empty label` });
  });

  for (let i = 1; i < lines.length; i++) {
    const line = lines[i];
    if (line === undefined || line.trim() === '') continue;
    const cells = line.split(',');
    if (cells.length !== header.length) {
      errors.push({
        row: i + 1,
        message: `expected ${header.length} columns, got ${cells.length}`,
      });
      continue;
    }
    const values = cells.map((cell) => Number(cell.trim()));
    const badIndex = values.findIndex((v) => !Number.isFinite(v));
    if (badIndex >= 0) {
      errors.push({ row: i + 1, message: `non-numeric value in column ${badIndex + 1}` });
      continue;
    }
    rows.push(values);
  }

  if (rows.length === 0 && errors.length === 0) {
    errors.push({ row: 1, message: 'no data rows' });
  }
  return { labels, rowCount: rows.length, errors, rows };
}

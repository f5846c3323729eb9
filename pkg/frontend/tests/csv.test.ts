import { describe, expect, it } from 'vitest';

import { parseCsvPreview } from '../src/csv.js';

const GOOD = 'wavelength_nm,aspirin,ibuprofen\n900,0.5,0.6\n1000,0.4,0.7\n1100,0.3,0.8\n';

describe('parseCsvPreview', () => {
  it('parses labels and counts rows', () => {
    const preview = parseCsvPreview(GOOD);
    expect(preview.labels).toEqual(['aspirin', 'ibuprofen']);
    expect(preview.rowCount).toBe(3);
    expect(preview.errors).toEqual([]);
    expect(preview.rows[0]).toEqual([900, 0.5, 0.6]);
  });

  it('rejects a missing or wrong header', () => {
    expect(parseCsvPreview('nm,a\n900,1\n').errors[0]?.message).toContain('wavelength_nm');
    expect(parseCsvPreview('').errors[0]?.message).toContain('empty');
  });

  it('requires at least one spectrum column', () => {
    const preview = parseCsvPreview('wavelength_nm\n900\n');
    expect(preview.errors[0]?.message).toContain('no spectrum columns');
  });

  it('reports rows with the wrong column count, keeps the rest', () => {
    const preview = parseCsvPreview(GOOD + '1200,0.2\n1300,0.1,0.9\n');
    expect(preview.rowCount).toBe(4);
    expect(preview.errors).toHaveLength(1);
    expect(preview.errors[0]).toMatchObject({ row: 5 });
  });

  it('reports non-numeric cells with their column', () => {
    const preview = parseCsvPreview('wavelength_nm,a\n900,ok\n1000,1\n');
    expect(preview.errors[0]?.message).toContain('column 2');
    expect(preview.rowCount).toBe(1);
  });

  it('flags empty column labels', () => {
    const preview = parseCsvPreview('wavelength_nm,a,\n900,1,2\n');
    expect(preview.errors.some((e) => e.message.includes('empty label'))).toBe(true);
  });

  it('ignores blank lines', () => {
    const preview = parseCsvPreview(GOOD + '\n\n');
    expect(preview.rowCount).toBe(3);
    expect(preview.errors).toEqual([]);
  });

  it('flags documents with a header but no rows', () => {
    const preview = parseCsvPreview('wavelength_nm,a\n');
    expect(preview.errors[0]?.message).toContain('no data rows');
  });
});

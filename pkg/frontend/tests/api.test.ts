import { describe, expect, it } from 'vitest';

import { ApiClient, ApiError } from '../src/api.js';

interface Captured {
  url: string;
  method: string;
  headers: Record<string, string>;
  body: string | undefined;
}

function clientWith(status: number, payload: unknown): { client: ApiClient; calls: Captured[] } {
  const calls: Captured[] = [];
  const fetchFn = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({
      url,
      method: init?.method ?? 'GET',
      headers: (init?.headers as Record<string, string>) ?? {},
      body: init?.body as string | undefined,
    });
    const text = payload === undefined ? '' : JSON.stringify(payload);
    return new Response(status === 204 ? null : text, { status });
  };
  return { client: new ApiClient('http://srv', fetchFn), calls };
}

describe('ApiClient', () => {
  it('lists instances from the documented endpoint', async () => {
    const { client, calls } = clientWith(200, []);
    await client.listInstances();
    expect(calls[0]).toMatchObject({ method: 'GET', url: 'http://srv/api/instances' });
  });

  it('creates instances with a JSON body', async () => {
    const { client, calls } = clientWith(201, { slug: 'x', name: 'X' });
    await client.createInstance({ name: 'X', min_spectra_per_class: 3 });
    expect(calls[0]?.method).toBe('POST');
    expect(calls[0]?.headers['content-type']).toBe('application/json');
    expect(JSON.parse(calls[0]?.body ?? '')).toEqual({ name: 'X', min_spectra_per_class: 3 });
  });

  it('filters spectra via query parameters', async () => {
    const { client, calls } = clientWith(200, []);
    await client.getSpectra('pills', { status: 'crowdsourced_unverified', label: 'a b' });
    expect(calls[0]?.url).toBe(
      'http://srv/api/instances/pills/spectra?status=crowdsourced_unverified&label=a+b',
    );
  });

  it('moderates spectrum status with PATCH', async () => {
    const { client, calls } = clientWith(200, { spectrum_id: 's1', status: 'crowdsourced_verified' });
    await client.setSpectrumStatus('pills', 's1', 'crowdsourced_verified');
    expect(calls[0]).toMatchObject({
      method: 'PATCH',
      url: 'http://srv/api/instances/pills/spectra/s1',
    });
    expect(JSON.parse(calls[0]?.body ?? '')).toEqual({ status: 'crowdsourced_verified' });
  });

  it('deletes spectra and tolerates 204', async () => {
    const { client, calls } = clientWith(204, undefined);
    await expect(client.deleteSpectrum('pills', 's1')).resolves.toBeUndefined();
    expect(calls[0]?.method).toBe('DELETE');
  });

  it('uploads CSV with a text/csv body, unmodified', async () => {
    const { client, calls } = clientWith(201, { imported: 2, failures: [] });
    const csv = 'wavelength_nm,a\n900,1\n';
    await client.bulkUpload('pills', csv);
    expect(calls[0]?.url).toBe('http://srv/api/instances/pills/spectra:bulk');
    expect(calls[0]?.headers['content-type']).toBe('text/csv');
    expect(calls[0]?.body).toBe(csv);
  });

  it('retrains with the include_unverified flag', async () => {
    const { client, calls } = clientWith(200, { version: 1, loo_accuracy: 1 });
    await client.retrain('pills', true);
    expect(JSON.parse(calls[0]?.body ?? '')).toEqual({ include_unverified: true });
  });

  it('turns server error documents into ApiError', async () => {
    const { client } = clientWith(409, {
      error_code: 'insufficient_data',
      message: 'classes below the 12-spectra threshold: b has 11/12',
      details: { deficits: { b: 11 } },
    });
    const err = await client.retrain('pills').catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    const apiErr = err as ApiError;
    expect(apiErr.status).toBe(409);
    expect(apiErr.errorCode).toBe('insufficient_data');
    expect(apiErr.details['deficits']).toEqual({ b: 11 });
  });

  it('handles non-JSON error bodies', async () => {
    const calls: Captured[] = [];
    const fetchFn = async (): Promise<Response> => new Response('boom', { status: 500 });
    const client = new ApiClient('http://srv', fetchFn);
    const err = await client.listInstances().catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).errorCode).toBe('http_error');
    expect(calls.length).toBe(0);
  });
});

/**
 * Typed client for the documented `/api` surface. The dashboard performs no
 * computation the server owns; everything rendered comes from these calls.
 */

import type {
  BulkImportResult,
  CreatedInstance,
  CreateInstanceRequest,
  InstanceSummary,
  Manifest,
  RetrainResult,
  SpectrumRecord,
  SpectrumStatus,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly errorCode: string,
    message: string,
    public readonly details: Record<string, unknown> = {},
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** The exact server surface the dashboard is allowed to touch. */
export interface DashboardApi {
  listInstances(): Promise<InstanceSummary[]>;
  createInstance(body: CreateInstanceRequest): Promise<CreatedInstance>;
  getManifest(slug: string): Promise<Manifest>;
  getSpectra(
    slug: string,
    filter?: { status?: SpectrumStatus; label?: string },
  ): Promise<SpectrumRecord[]>;
  setSpectrumStatus(
    slug: string,
    spectrumId: string,
    status: SpectrumStatus,
  ): Promise<{ spectrum_id: string; status: SpectrumStatus }>;
  deleteSpectrum(slug: string, spectrumId: string): Promise<void>;
  bulkUpload(slug: string, csvText: string): Promise<BulkImportResult>;
  retrain(slug: string, includeUnverified?: boolean): Promise<RetrainResult>;
}

export class ApiClient implements DashboardApi {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, init: RequestInit = {}): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, { method, ...init });
    if (resp.status === 204) {
      return undefined as T;
    }
    let body: unknown = null;
    const text = await resp.text();
    if (text) {
      try {
        body = JSON.parse(text);
      } catch {
        body = null;
      }
    }
    if (!resp.ok) {
      const doc = (body ?? {}) as Partial<{ error_code: string; message: string; details: Record<string, unknown> }>;
      throw new ApiError(
        resp.status,
        doc.error_code ?? 'http_error',
        doc.message ?? `HTTP ${resp.status}`,
        doc.details ?? {},
      );
    }
    return body as T;
  }

  private json<T>(method: string, path: string, payload: unknown): Promise<T> {
    return this.request<T>(method, path, {
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
  }

  listInstances(): Promise<InstanceSummary[]> {
    return this.request('GET', '/api/instances');
  }

  createInstance(body: CreateInstanceRequest): Promise<CreatedInstance> {
    return this.json('POST', '/api/instances', body);
  }

  getManifest(slug: string): Promise<Manifest> {
    return this.request('GET', `/api/instances/${slug}/manifest`);
  }

  getSpectra(
    slug: string,
    filter: { status?: SpectrumStatus; label?: string } = {},
  ): Promise<SpectrumRecord[]> {
    const params = new URLSearchParams();
    if (filter.status) params.set('status', filter.status);
    if (filter.label) params.set('label', filter.label);
    const query = params.toString();
    return this.request('GET', `/api/instances/${slug}/spectra${query ? `?${query}` : ''}`);
  }

  setSpectrumStatus(
    slug: string,
    spectrumId: string,
    status: SpectrumStatus,
  ): Promise<{ spectrum_id: string; status: SpectrumStatus }> {
    return this.json('PATCH', `/api/instances/${slug}/spectra/${spectrumId}`, { status });
  }

  deleteSpectrum(slug: string, spectrumId: string): Promise<void> {
    return this.request('DELETE', `/api/instances/${slug}/spectra/${spectrumId}`);
  }

  bulkUpload(slug: string, csvText: string): Promise<BulkImportResult> {
    return this.request('POST', `/api/instances/${slug}/spectra:bulk`, {
      headers: { 'content-type': 'text/csv' },
      body: csvText,
    });
  }

  retrain(slug: string, includeUnverified = false): Promise<RetrainResult> {
    return this.json('POST', `/api/instances/${slug}/retrain`, {
      include_unverified: includeUnverified,
    });
  }
}

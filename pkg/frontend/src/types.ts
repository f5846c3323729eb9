/** Wire types for the nirhub HTTP API. Field names mirror the server exactly. */

export type SpectrumStatus =
  | 'reference'
  | 'crowdsourced_unverified'
  | 'crowdsourced_verified';

export type ScanMode = 'train' | 'identify';

export interface PipelineConfig {
  grid_start_nm: number;
  grid_end_nm: number;
  grid_points: number;
  sg_window: number;
  sg_polyorder: number;
  sg_derivative: number;
  apply_snv: boolean;
}

/** Per-class training progress, computed server-side. */
export interface ThresholdReport {
  counts: Record<string, number>;
  threshold_met: boolean;
  deficient_classes: string[];
  min_spectra_per_class: number;
}

export interface InstanceSummary extends ThresholdReport {
  slug: string;
  name: string;
  created_at: string;
  knowledge_base_size: number;
  model_available: boolean;
  model_version: number | null;
  loo_accuracy: number | null;
}

export interface Manifest {
  protocol_version: number;
  slug: string;
  name: string;
  instructions: Record<ScanMode, string>;
  pipeline: PipelineConfig;
  model_available: boolean;
  model_version: number | null;
  created_at: string;
}

export interface CreatedInstance {
  slug: string;
  name: string;
  manifest_path: string;
  manifest_url: string;
  created_at: string;
}

export interface CreateInstanceRequest {
  name: string;
  instructions?: Partial<Record<ScanMode, string>>;
  pipeline?: Partial<PipelineConfig>;
  min_spectra_per_class?: number;
  k?: number;
  distance?: 'euclidean' | 'cosine';
}

export interface SpectrumMeta {
  device_id: string;
  captured_at: string;
  source: string;
  label?: string;
}

export interface SpectrumDoc {
  wavelengths_nm: number[];
  intensities: number[];
  meta: SpectrumMeta;
}

export interface SpectrumRecord {
  spectrum_id: string;
  label: string;
  status: SpectrumStatus;
  added_at: string;
  spectrum: SpectrumDoc;
}

export interface RetrainResult {
  version: number;
  loo_accuracy: number;
  examples: number;
  classes: string[];
}

export interface UploadFailure {
  where: string;
  message: string;
}

export interface BulkImportResult extends ThresholdReport {
  imported: number;
  failures: UploadFailure[];
}

export interface ApiErrorDoc {
  error_code: string;
  message: string;
  details: Record<string, unknown>;
}

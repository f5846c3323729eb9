/**
 * Instance detail: training progress, retrain control, spectrum chart,
 * CSV bulk upload, and the crowdsourcing review table. Verify/reject update
 * the row optimistically and reconcile with the server response; counts,
 * accuracies, versions, and thresholds are always the server's numbers.
 */

import { ApiError, type DashboardApi } from '../api.js';
import { renderChartSvg } from '../chart.js';
import { parseCsvPreview } from '../csv.js';
import { clear, h } from '../dom.js';
import { RequestSequencer } from '../sequencer.js';
import type { InstanceSummary, SpectrumRecord, SpectrumStatus } from '../types.js';

export function retrainTooltip(summary: InstanceSummary): string {
  if (summary.threshold_met) return 'train a new model version';
  if (summary.deficient_classes.length === 0) {
    return 'needs at least 2 classes with eligible spectra';
  }
  const parts = summary.deficient_classes.map(
    (cls) => `${cls} (${summary.counts[cls] ?? 0}/${summary.min_spectra_per_class})`,
  );
  return `below threshold: ${parts.join(', ')}`;
}

export function statusChipText(status: SpectrumStatus): string {
  return {
    reference: 'reference',
    crowdsourced_unverified: 'unverified',
    crowdsourced_verified: 'verified',
  }[status];
}

interface Deps {
  api: DashboardApi;
  sequencer: RequestSequencer;
  onBack: () => void;
}

export function mountInstanceView(
  root: HTMLElement,
  slug: string,
  deps: Deps,
): { refresh: () => Promise<void> } {
  const { api, sequencer, onBack } = deps;

  const banner = h('p', { class: 'error', role: 'alert', hidden: true });
  const title = h('h1', {}, slug);
  const urlLine = h('p', { class: 'manifest' });
  const progress = h('div', { class: 'progress' });
  const modelLine = h('p', { class: 'model' });
  const retrainButton = h('button', { type: 'button' }) as HTMLButtonElement;
  const includeUnverified = h('input', { type: 'checkbox', name: 'include-unverified' }) as HTMLInputElement;
  const retrainResult = h('span', { class: 'retrain-result' });
  const chartBox = h('div', { class: 'chart' });
  const reviewBody = h('tbody');
  const uploadInput = h('textarea', { rows: '4', name: 'csv', placeholder: 'wavelength_nm,label1,label2…' }) as HTMLTextAreaElement;
  const uploadReport = h('div', { class: 'upload-report' });

  function showError(err: unknown): void {
    banner.textContent = err instanceof ApiError ? err.message : String(err);
    banner.hidden = false;
  }

  function renderSummary(summary: InstanceSummary): void {
    title.textContent = `${summary.name} `;
    title.append(h('code', {}, summary.slug));
    clear(progress);
    for (const [cls, count] of Object.entries(summary.counts)) {
      const met = count >= summary.min_spectra_per_class;
      progress.append(
        h(
          'div',
          { class: `class-progress ${met ? 'ok' : 'pending'}`, 'data-class': cls },
          h('span', { class: 'class-name' }, cls),
          h('span', { class: 'class-count' }, ` ${count}/${summary.min_spectra_per_class} `),
          h('span', { class: 'badge' }, met ? 'ok' : 'needs more'),
        ),
      );
    }
    progress.append(
      h(
        'p',
        { class: `threshold ${summary.threshold_met ? 'ok' : 'pending'}` },
        summary.threshold_met ? 'threshold satisfied' : 'threshold not met',
      ),
    );
    modelLine.textContent =
      summary.model_available && summary.model_version !== null
        ? `model v${summary.model_version} · leave-one-out accuracy ${
            summary.loo_accuracy === null ? '?' : (summary.loo_accuracy * 100).toFixed(1)
          }%`
        : 'no model trained yet';
    retrainButton.disabled = !summary.threshold_met;
    retrainButton.title = retrainTooltip(summary);
    retrainButton.textContent = 'Retrain';
  }

  function reviewRow(record: SpectrumRecord): HTMLElement {
    const chip = h('span', { class: `chip ${record.status}` }, statusChipText(record.status));
    const row = h(
      'tr',
      { 'data-spectrum-id': record.spectrum_id },
      h('td', {}, record.label),
      h('td', {}, chip),
      h('td', {}, record.added_at),
      h('td', {}, String(record.spectrum.wavelengths_nm.length)),
    );
    const actions = h('td');
    if (record.status !== 'reference') {
      const target: SpectrumStatus =
        record.status === 'crowdsourced_unverified'
          ? 'crowdsourced_verified'
          : 'crowdsourced_unverified';
      actions.append(
        h('button', {
          type: 'button',
          class: 'verify',
          onclick: async () => {
            const previous = record.status;
            chip.textContent = statusChipText(target); // optimistic
            try {
              const result = await api.setSpectrumStatus(slug, record.spectrum_id, target);
              chip.textContent = statusChipText(result.status); // reconcile
              await refresh();
            } catch (err) {
              chip.textContent = statusChipText(previous);
              showError(err);
            }
          },
        }, target === 'crowdsourced_verified' ? 'verify' : 'unverify'),
        h('button', {
          type: 'button',
          class: 'reject',
          onclick: async () => {
            row.remove(); // optimistic
            try {
              await api.deleteSpectrum(slug, record.spectrum_id);
              await refresh();
            } catch (err) {
              showError(err);
              await refresh(); // restore from the server's truth
            }
          },
        }, 'reject'),
      );
    }
    row.append(actions);
    return row;
  }

  async function refresh(): Promise<void> {
    const fetched = await sequencer.run(`instance:${slug}`, async () => {
      const [summaries, records] = await Promise.all([
        api.listInstances(),
        api.getSpectra(slug),
      ]);
      return { summaries, records };
    });
    if (fetched === null) return; // stale; newer refresh owns the view
    const summary = fetched.summaries.find((s) => s.slug === slug);
    if (!summary) {
      showError(new Error(`instance ${slug} disappeared`));
      return;
    }
    renderSummary(summary);
    urlLine.textContent = 'registration URL: ';
    urlLine.append(h('code', {}, `${location.origin}/api/instances/${slug}/manifest`));
    chartBox.innerHTML = fetched.records.length
      ? renderChartSvg(fetched.records)
      : '<p>no spectra yet</p>';
    clear(reviewBody);
    const crowdsourced = fetched.records.filter((r) => r.status !== 'reference');
    for (const record of crowdsourced) reviewBody.append(reviewRow(record));
    if (!crowdsourced.length) {
      reviewBody.append(h('tr', {}, h('td', { colspan: '5' }, 'no crowdsourced spectra')));
    }
  }

  retrainButton.addEventListener('click', async () => {
    banner.hidden = true;
    retrainResult.textContent = 'training…';
    try {
      const result = await api.retrain(slug, includeUnverified.checked);
      retrainResult.textContent = `trained v${result.version} · leave-one-out accuracy ${(result.loo_accuracy * 100).toFixed(1)}% on ${result.examples} spectra`;
      await refresh();
    } catch (err) {
      retrainResult.textContent = '';
      showError(err);
    }
  });

  async function upload(): Promise<void> {
    banner.hidden = true;
    clear(uploadReport);
    const text = uploadInput.value;
    const preview = parseCsvPreview(text);
    if (preview.errors.length) {
      uploadReport.append(
        h('p', { class: 'warn' }, 'rows that will be rejected:'),
        ...preview.errors.map((e) => h('p', { class: 'row-error' }, `row ${e.row}: ${e.message}`)),
      );
    }
    if (!preview.labels.length) return; // nothing importable at all
    try {
      const result = await api.bulkUpload(slug, text);
      uploadReport.append(h('p', { class: 'ok' }, `imported ${result.imported} spectra`));
      for (const failure of result.failures) {
        uploadReport.append(h('p', { class: 'row-error' }, `${failure.where}: ${failure.message}`));
      }
      await refresh();
    } catch (err) {
      showError(err);
    }
  }

  clear(root);
  root.append(
    h('p', {}, h('a', { href: '#/', onclick: () => onBack() }, '← all instances')),
    title,
    banner,
    urlLine,
    h('section', {}, h('h2', {}, 'Training progress'), progress, modelLine,
      h('div', { class: 'retrain-controls' },
        retrainButton,
        h('label', {}, includeUnverified, ' include unverified'),
        retrainResult)),
    h('section', {}, h('h2', {}, 'Knowledge-base'), chartBox),
    h('section', {}, h('h2', {}, 'Bulk upload (CSV)'), uploadInput,
      h('button', { type: 'button', class: 'upload', onclick: () => void upload() }, 'Upload'),
      uploadReport),
    h('section', {}, h('h2', {}, 'Crowdsourcing review'),
      h('table', { class: 'review' },
        h('thead', {}, h('tr', {},
          h('th', {}, 'label'), h('th', {}, 'status'), h('th', {}, 'added'),
          h('th', {}, 'points'), h('th', {}, 'actions'))),
        reviewBody)),
  );
  return { refresh };
}

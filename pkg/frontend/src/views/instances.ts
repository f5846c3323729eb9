/**
 * Instance list + creation form. Form validation mirrors the server's rules
 * for the empty-name case locally; every other failure is the server's
 * verdict rendered inline. Successful creation shows the registration URL
 * with a copy control and refreshes the list without a page reload.
 */

import { ApiError, type DashboardApi } from '../api.js';
import { clear, h } from '../dom.js';
import { RequestSequencer } from '../sequencer.js';
import type { CreateInstanceRequest, InstanceSummary } from '../types.js';

export function progressText(summary: InstanceSummary): string {
  const parts = Object.entries(summary.counts).map(
    ([cls, n]) => `${cls} ${n}/${summary.min_spectra_per_class}`,
  );
  return parts.length ? parts.join(' · ') : 'no eligible spectra yet';
}

export function modelText(summary: InstanceSummary): string {
  if (!summary.model_available || summary.model_version === null) return 'no model';
  const acc = summary.loo_accuracy === null ? '' : ` · LOO ${(summary.loo_accuracy * 100).toFixed(1)}%`;
  return `v${summary.model_version}${acc}`;
}

interface Deps {
  api: DashboardApi;
  sequencer: RequestSequencer;
  onOpen: (slug: string) => void;
}

export function mountInstancesView(root: HTMLElement, deps: Deps): { refresh: () => Promise<void> } {
  const { api, sequencer, onOpen } = deps;

  const formError = h('p', { class: 'error', role: 'alert', hidden: true });
  const createdBox = h('div', { class: 'created', hidden: true });
  const nameInput = h('input', { name: 'name', placeholder: 'e.g. Pill Checker' }) as HTMLInputElement;
  const trainInput = h('textarea', { name: 'train-instructions', rows: '2' }) as HTMLTextAreaElement;
  const identifyInput = h('textarea', { name: 'identify-instructions', rows: '2' }) as HTMLTextAreaElement;
  const minInput = h('input', { name: 'min-per-class', type: 'number', placeholder: '12' }) as HTMLInputElement;

  const listBody = h('tbody');

  async function refresh(): Promise<void> {
    const summaries = await sequencer.run('instances', () => api.listInstances());
    if (summaries === null) return; // stale response; a newer refresh owns the view
    clear(listBody);
    for (const summary of summaries) {
      listBody.append(
        h(
          'tr',
          { 'data-slug': summary.slug },
          h('td', {}, h('a', { href: `#/i/${summary.slug}`, onclick: () => onOpen(summary.slug) }, summary.name)),
          h('td', {}, h('code', {}, summary.slug)),
          h('td', {}, String(summary.knowledge_base_size)),
          h('td', {}, progressText(summary)),
          h('td', { class: summary.threshold_met ? 'ok' : 'pending' },
            summary.threshold_met ? 'ready to train' : 'below threshold'),
          h('td', {}, modelText(summary)),
        ),
      );
    }
    if (!summaries.length) {
      listBody.append(h('tr', {}, h('td', { colspan: '6' }, 'no instances yet')));
    }
  }

  async function submit(event: Event): Promise<void> {
    event.preventDefault();
    formError.hidden = true;
    createdBox.hidden = true;
    const name = nameInput.value.trim();
    if (!name) {
      formError.textContent = 'name must be non-empty';
      formError.hidden = false;
      return; // mirrors the server rule; no request is sent
    }
    const body: CreateInstanceRequest = { name };
    const instructions: Record<string, string> = {};
    if (trainInput.value.trim()) instructions['train'] = trainInput.value.trim();
    if (identifyInput.value.trim()) instructions['identify'] = identifyInput.value.trim();
    if (Object.keys(instructions).length) body.instructions = instructions;
    if (minInput.value) body.min_spectra_per_class = Number(minInput.value);
    try {
      const created = await api.createInstance(body);
      clear(createdBox as HTMLElement);
      const urlCode = h('code', { class: 'manifest-url' }, created.manifest_url);
      createdBox.append(
        h('span', {}, `created ${created.name} — registration URL: `),
        urlCode,
        h('button', {
          type: 'button',
          onclick: () => void navigator.clipboard?.writeText(created.manifest_url),
        }, 'copy'),
      );
      createdBox.hidden = false;
      nameInput.value = '';
      await refresh();
    } catch (err) {
      formError.textContent = err instanceof ApiError ? err.message : String(err);
      formError.hidden = false;
    }
  }

  clear(root);
  root.append(
    h('h1', {}, 'Instances'),
    h(
      'form',
      { class: 'create-form', onsubmit: submit as EventListener },
      h('label', {}, 'Name', nameInput),
      h('label', {}, 'Training instructions', trainInput),
      h('label', {}, 'Identify instructions', identifyInput),
      h('label', {}, 'Min spectra per class', minInput),
      h('button', { type: 'submit' }, 'Create instance'),
      formError,
      createdBox,
    ),
    h(
      'table',
      { class: 'instances' },
      h(
        'thead',
        {},
        h(
          'tr',
          {},
          h('th', {}, 'name'),
          h('th', {}, 'slug'),
          h('th', {}, 'spectra'),
          h('th', {}, 'training progress'),
          h('th', {}, 'threshold'),
          h('th', {}, 'model'),
        ),
      ),
      listBody,
    ),
  );
  return { refresh };
}

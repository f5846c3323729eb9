/** Hash-routed entry point: #/ lists instances, #/i/<slug> shows one. */

import { ApiClient } from './api.js';
import { RequestSequencer } from './sequencer.js';
import { mountInstancesView } from './views/instances.js';
import { mountInstanceView } from './views/instance.js';

const api = new ApiClient('');
const sequencer = new RequestSequencer();

function route(): void {
  const root = document.getElementById('app');
  if (!root) return;
  const match = /^#\/i\/([a-z0-9-]+)$/.exec(location.hash);
  if (match && match[1]) {
    const slug = match[1];
    const view = mountInstanceView(root, slug, {
      api,
      sequencer,
      onBack: () => {
        location.hash = '#/';
      },
    });
    void view.refresh();
  } else {
    const view = mountInstancesView(root, {
      api,
      sequencer,
      onOpen: (slug) => {
        location.hash = `#/i/${slug}`;
      },
    });
    void view.refresh();
  }
}

window.addEventListener('hashchange', route);
route();

import { Api } from './api.js';
import { route } from './router.js';

// Browser entry point. The service origin defaults to the page's own;
// override with ?api=http://host:port when served separately.
function boot(): void {
  const root = document.getElementById('app');
  if (!root) throw new Error('missing #app root');
  const base = new URLSearchParams(window.location.search).get('api') ?? '';
  const client = new Api(base);
  const go = () => {
    route(root, client, window.location.hash).catch((err) => {
      root.textContent = String(err);
    });
  };
  window.addEventListener('hashchange', go);
  go();
}

boot();

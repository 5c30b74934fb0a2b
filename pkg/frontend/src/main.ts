import { initApp } from './app.js';

// Same-origin by default (served from the review service under /ui);
// data-api-base supports running against a service on another port.
const root = document.getElementById('app');
const base = root?.dataset.apiBase ?? '';
initApp(document, base).catch((err) => {
  console.error('failed to start review UI', err);
});

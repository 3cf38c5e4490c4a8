/** Bootstrap: wire the controller, API client, and idle tracking together. */

import { ApiClient } from './api.js';
import { ReviewController } from './controller.js';
import { renderPage, renderProgress, type Elements } from './dom.js';

function credential(name: string, label: string): string {
  const params = new URLSearchParams(window.location.search);
  const fromUrl = params.get(name);
  if (fromUrl) {
    sessionStorage.setItem(name, fromUrl);
    return fromUrl;
  }
  const stored = sessionStorage.getItem(name);
  if (stored) return stored;
  const entered = window.prompt(label) ?? '';
  sessionStorage.setItem(name, entered);
  return entered;
}

async function start(): Promise<void> {
  const reviewerId = credential('reviewer', 'Reviewer id:');
  const token = credential('token', 'Review token:');
  const api = new ApiClient(reviewerId, token);
  const controller = new ReviewController(api);

  const elements: Elements = {
    heading: document.getElementById('model-label')!,
    progressLine: document.getElementById('progress-line')!,
    progressBar: document.getElementById('progress-bar')!,
    grid: document.getElementById('grid')!,
    banner: document.getElementById('banner')!,
    backButton: document.getElementById('back') as HTMLButtonElement,
    nextButton: document.getElementById('next') as HTMLButtonElement,
  };

  for (const eventName of ['keydown', 'mousemove', 'mousedown', 'scroll']) {
    window.addEventListener(eventName, () => controller.noteActivity(), {
      passive: true,
    });
  }

  const rerender = () => {
    renderPage(elements, controller.viewModel(), controller, api);
    renderProgress(elements, controller.progress);
  };

  elements.backButton.addEventListener('click', async () => {
    await controller.goBack();
    rerender();
  });

  elements.nextButton.addEventListener('click', async () => {
    elements.nextButton.disabled = true;
    try {
      const outcome = await controller.submit();
      if (outcome === 'conflict-refreshed') {
        elements.banner.textContent =
          'This page changed elsewhere; it was refreshed. Check it and submit again.';
        elements.banner.classList.add('visible');
      }
    } catch (error) {
      elements.banner.textContent = `Submission failed: ${String(error)}. Your entries are kept.`;
      elements.banner.classList.add('visible');
    } finally {
      elements.nextButton.disabled = false;
      rerender();
    }
  });

  await controller.loadNext();
  rerender();
}

void start();

/** DOM rendering: a dumb projection of the view model onto the page. */

import type { ApiClient } from './api.js';
import type { ReviewController } from './controller.js';
import { imagesProgressLine, isComplete, progressText } from './viewModel.js';
import type { PageViewModel, Progress } from './types.js';

export interface Elements {
  heading: HTMLElement;
  progressLine: HTMLElement;
  progressBar: HTMLElement;
  grid: HTMLElement;
  banner: HTMLElement;
  backButton: HTMLButtonElement;
  nextButton: HTMLButtonElement;
}

export function renderProgress(elements: Elements, progress: Progress | null): void {
  if (!progress) return;
  elements.progressLine.textContent = progressText(progress);
  const percent = isComplete(progress)
    ? 100
    : Number(imagesProgressLine(progress).match(/\((\d+)%\)/)?.[1] ?? 0);
  elements.progressBar.style.width = `${percent}%`;
}

export function renderPage(
  elements: Elements,
  model: PageViewModel | null,
  controller: ReviewController,
  api: ApiClient,
): void {
  elements.grid.textContent = '';
  if (model === null) {
    elements.heading.textContent = '';
    elements.banner.textContent = controller.complete
      ? 'All pages are done. Thank you!'
      : '';
    elements.banner.classList.toggle('visible', controller.complete);
    return;
  }
  elements.banner.classList.remove('visible');
  elements.heading.textContent = model.heading;
  elements.backButton.disabled = !controller.canGoBack;

  const inputs: HTMLInputElement[] = [];
  model.cells.forEach((cell, index) => {
    const figure = document.createElement('figure');
    figure.className = 'cell';

    const img = document.createElement('img');
    img.src = api.imageUrl(cell.url);
    img.alt = cell.imageId;
    img.addEventListener('error', () => {
      // a broken image must never block the reviewer: show the id instead
      const placeholder = document.createElement('div');
      placeholder.className = 'placeholder';
      placeholder.textContent = `image unavailable: ${cell.imageId}`;
      img.replaceWith(placeholder);
    });
    figure.appendChild(img);

    const input = document.createElement('input');
    input.type = 'text';
    input.value = cell.value;
    input.spellcheck = false;
    input.setAttribute('data-image-id', cell.imageId);
    input.classList.toggle('lint-invalid', cell.lint === 'invalid');
    input.title = cell.lint === 'invalid' ? 'not a valid label (will still submit)' : '';
    input.addEventListener('input', () => {
      controller.setDraft(cell.imageId, input.value);
      input.classList.toggle(
        'lint-invalid',
        controller.viewModel()?.cells[index]?.lint === 'invalid',
      );
    });
    if (index === model.cells.length - 1) {
      input.addEventListener('keydown', (event) => {
        if (event.key === 'Enter') {
          event.preventDefault();
          elements.nextButton.click();
        }
      });
    }
    figure.appendChild(input);
    inputs.push(input);
    elements.grid.appendChild(figure);
  });
  inputs[0]?.focus();
  renderProgress(elements, model.progress);
}

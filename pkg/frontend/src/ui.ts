/** DOM layer: start form, side-by-side comparison, progress, completion. */

import { StudyApi } from './api.js';
import { SessionState, StudySession } from './session.js';

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const OBSERVER_KEY = 'iqabench.observer';

export function createApp(
  root: HTMLElement,
  api: StudyApi,
  storage?: StorageLike,
): StudySession {
  const session = new StudySession(api);
  const view = new View(root, api, session, storage);
  view.mount();
  return session;
}

class View {
  private readonly doc: Document;
  private els!: {
    start: HTMLElement;
    nameInput: HTMLInputElement;
    startError: HTMLElement;
    compare: HTMLElement;
    progress: HTMLElement;
    referenceWrap: HTMLElement;
    referenceToggle: HTMLInputElement;
    referenceImg: HTMLImageElement;
    leftImg: HTMLImageElement;
    rightImg: HTMLImageElement;
    leftButton: HTMLButtonElement;
    rightButton: HTMLButtonElement;
    done: HTMLElement;
    doneSummary: HTMLElement;
    banner: HTMLElement;
    bannerText: HTMLElement;
  };

  constructor(
    private readonly root: HTMLElement,
    private readonly api: StudyApi,
    private readonly session: StudySession,
    private readonly storage?: StorageLike,
  ) {
    this.doc = root.ownerDocument;
  }

  mount(): void {
    this.build();
    this.session.subscribe((state) => this.render(state));
    this.doc.defaultView?.addEventListener('keydown', (event) => this.onKey(event));
  }

  private el<T extends HTMLElement>(tag: string, className?: string, text?: string): T {
    const node = this.doc.createElement(tag) as T;
    if (className) node.className = className;
    if (text) node.textContent = text;
    return node;
  }

  private build(): void {
    const doc = this.doc;

    const start = this.el<HTMLElement>('section', 'screen start-screen');
    start.appendChild(this.el('h1', undefined, 'Image comparison study'));
    start.appendChild(
      this.el(
        'p',
        'instructions',
        'You will see pairs of processed images. Pick the one that looks better. ' +
          'Enter a name to begin or resume.',
      ),
    );
    const form = this.el<HTMLFormElement>('form', 'start-form');
    const nameInput = this.el<HTMLInputElement>('input');
    nameInput.id = 'observer-name';
    nameInput.setAttribute('placeholder', 'your name');
    nameInput.value = this.storage?.getItem(OBSERVER_KEY) ?? '';
    const startButton = this.el<HTMLButtonElement>('button', undefined, 'Start');
    startButton.setAttribute('type', 'submit');
    form.appendChild(nameInput);
    form.appendChild(startButton);
    form.addEventListener('submit', (event) => {
      event.preventDefault();
      void this.begin(nameInput.value);
    });
    start.appendChild(form);
    const startError = this.el<HTMLElement>('p', 'form-error');
    start.appendChild(startError);

    const compare = this.el<HTMLElement>('section', 'screen compare-screen');
    const header = this.el<HTMLElement>('header', 'compare-header');
    const progress = this.el<HTMLElement>('span', 'progress');
    progress.id = 'progress';
    const toggleLabel = this.el<HTMLLabelElement>('label', 'reference-toggle');
    const referenceToggle = this.el<HTMLInputElement>('input');
    referenceToggle.setAttribute('type', 'checkbox');
    referenceToggle.checked = true;
    toggleLabel.appendChild(referenceToggle);
    toggleLabel.appendChild(doc.createTextNode(' show original'));
    header.appendChild(progress);
    header.appendChild(toggleLabel);
    compare.appendChild(header);

    const referenceWrap = this.el<HTMLElement>('figure', 'reference');
    const referenceImg = this.el<HTMLImageElement>('img');
    referenceImg.setAttribute('alt', 'original image');
    referenceWrap.appendChild(referenceImg);
    const refCaption = this.el<HTMLElement>('figcaption', undefined, 'original');
    referenceWrap.appendChild(refCaption);
    compare.appendChild(referenceWrap);

    const pairRow = this.el<HTMLElement>('div', 'pair');
    const leftButton = this.el<HTMLButtonElement>('button', 'choice choice-left');
    const leftImg = this.el<HTMLImageElement>('img');
    leftImg.setAttribute('alt', 'candidate A');
    leftButton.appendChild(leftImg);
    const rightButton = this.el<HTMLButtonElement>('button', 'choice choice-right');
    const rightImg = this.el<HTMLImageElement>('img');
    rightImg.setAttribute('alt', 'candidate B');
    rightButton.appendChild(rightImg);
    leftButton.addEventListener('click', () => void this.session.vote('left'));
    rightButton.addEventListener('click', () => void this.session.vote('right'));
    pairRow.appendChild(leftButton);
    pairRow.appendChild(rightButton);
    compare.appendChild(pairRow);
    compare.appendChild(
      this.el('p', 'hint', 'Click the better image, or press the left / right arrow key.'),
    );

    const done = this.el<HTMLElement>('section', 'screen done-screen');
    done.appendChild(this.el('h1', undefined, 'All done'));
    const doneSummary = this.el<HTMLElement>('p', 'done-summary');
    done.appendChild(doneSummary);
    done.appendChild(this.el('p', undefined, 'Thank you for taking part.'));

    const banner = this.el<HTMLElement>('div', 'banner');
    const bannerText = this.el<HTMLElement>('span', 'banner-text');
    const retry = this.el<HTMLButtonElement>('button', undefined, 'Retry');
    retry.addEventListener('click', () => void this.session.retry());
    banner.appendChild(bannerText);
    banner.appendChild(retry);

    referenceToggle.addEventListener('change', () => {
      referenceWrap.hidden = !referenceToggle.checked;
    });

    this.root.replaceChildren(start, compare, done, banner);
    this.els = {
      start,
      nameInput,
      startError,
      compare,
      progress,
      referenceWrap,
      referenceToggle,
      referenceImg,
      leftImg,
      rightImg,
      leftButton,
      rightButton,
      done,
      doneSummary,
      banner,
      bannerText,
    };
  }

  private async begin(name: string): Promise<void> {
    if (!name.trim()) {
      this.els.startError.textContent = 'Please enter a name.';
      return;
    }
    this.storage?.setItem(OBSERVER_KEY, name.trim());
    await this.session.start(name);
  }

  private onKey(event: KeyboardEvent): void {
    const state = this.session.getState();
    if (state.phase !== 'comparing' || state.submitting) return;
    if (event.key === 'ArrowLeft') {
      event.preventDefault();
      void this.session.vote('left');
    } else if (event.key === 'ArrowRight') {
      event.preventDefault();
      void this.session.vote('right');
    }
  }

  private render(state: SessionState): void {
    const { els } = this;
    els.start.hidden = state.phase !== 'start';
    els.compare.hidden = state.phase !== 'comparing';
    els.done.hidden = state.phase !== 'done';
    els.banner.hidden = state.phase !== 'error';

    if (state.phase === 'start') {
      els.startError.textContent = state.errorMessage;
      return;
    }
    if (state.phase === 'error') {
      els.bannerText.textContent = state.errorMessage;
      return;
    }
    if (state.phase === 'done') {
      els.doneSummary.textContent =
        `You compared ${state.totalPairs} ` +
        `pair${state.totalPairs === 1 ? '' : 's'} of images.`;
      return;
    }
    if (state.pair) {
      els.progress.textContent = `${state.completed} / ${state.totalPairs}`;
      const left = this.api.imageUrl(state.pair.left_image_url);
      const right = this.api.imageUrl(state.pair.right_image_url);
      const reference = this.api.imageUrl(state.pair.reference_image_url);
      // assign src only on change so an in-place refresh does not refetch
      if (els.leftImg.getAttribute('src') !== left) els.leftImg.setAttribute('src', left);
      if (els.rightImg.getAttribute('src') !== right) els.rightImg.setAttribute('src', right);
      if (els.referenceImg.getAttribute('src') !== reference) {
        els.referenceImg.setAttribute('src', reference);
      }
      els.leftButton.disabled = state.submitting;
      els.rightButton.disabled = state.submitting;
    }
  }
}

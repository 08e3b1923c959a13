// @vitest-environment happy-dom
import { beforeEach, describe, expect, it, vi } from 'vitest';

import { createApp } from '../src/ui.js';
import { StudySession } from '../src/session.js';
import { FakeApi } from './fake-api.js';

function mount(api: FakeApi): { root: HTMLElement; session: StudySession } {
  document.body.innerHTML = '<main id="app"></main>';
  const root = document.getElementById('app') as HTMLElement;
  const session = createApp(root, api);
  return { root, session };
}

function query<T extends HTMLElement>(selector: string): T {
  const node = document.querySelector(selector);
  if (!node) throw new Error(`missing ${selector}`);
  return node as T;
}

async function startStudy(name = 'tester'): Promise<void> {
  query<HTMLInputElement>('#observer-name').value = name;
  query<HTMLFormElement>('form.start-form').dispatchEvent(
    new Event('submit', { bubbles: true, cancelable: true }),
  );
  await vi.waitFor(() => {
    expect(query('.compare-screen').hidden).toBe(false);
  });
}

describe('study UI', () => {
  beforeEach(() => {
    document.body.innerHTML = '';
  });

  it('blocks an empty name client-side', async () => {
    const api = new FakeApi(3);
    mount(api);
    query<HTMLFormElement>('form.start-form').dispatchEvent(
      new Event('submit', { bubbles: true, cancelable: true }),
    );
    await vi.waitFor(() => {
      expect(query('.form-error').textContent).toContain('name');
    });
    expect(api.voteCalls).toBe(0);
  });

  it('shows the pair, progress, and toggleable reference', async () => {
    const api = new FakeApi(4);
    mount(api);
    await startStudy();
    expect(query('#progress').textContent).toBe('0 / 4');
    const reference = query<HTMLImageElement>('.reference img');
    expect(reference.getAttribute('src')).toContain('/api/images/');
    expect(query('.reference').hidden).toBe(false); // shown by default

    const toggle = query<HTMLInputElement>('.reference-toggle input');
    toggle.checked = false;
    toggle.dispatchEvent(new Event('change', { bubbles: true }));
    expect(query('.reference').hidden).toBe(true);
  });

  it('votes by clicking an image and advances', async () => {
    const api = new FakeApi(2);
    mount(api);
    await startStudy();
    query<HTMLButtonElement>('.choice-left').click();
    await vi.waitFor(() => {
      expect(query('#progress').textContent).toBe('1 / 2');
    });
    expect(api.votes).toEqual(['left']);
  });

  it('votes with arrow keys', async () => {
    const api = new FakeApi(2);
    mount(api);
    await startStudy();
    window.dispatchEvent(new KeyboardEvent('keydown', { key: 'ArrowRight' }));
    await vi.waitFor(() => {
      expect(query('#progress').textContent).toBe('1 / 2');
    });
    window.dispatchEvent(new KeyboardEvent('keydown', { key: 'ArrowLeft' }));
    await vi.waitFor(() => {
      expect(query('.done-screen').hidden).toBe(false);
    });
    expect(api.votes).toEqual(['right', 'left']);
  });

  it('a double-click produces a single vote', async () => {
    const api = new FakeApi(3);
    mount(api);
    await startStudy();
    let release!: () => void;
    api.voteGate = new Promise((resolve) => {
      release = resolve;
    });
    const left = query<HTMLButtonElement>('.choice-left');
    left.click();
    left.click();
    release();
    await vi.waitFor(() => {
      expect(query('#progress').textContent).toBe('1 / 3');
    });
    expect(api.votes).toEqual(['left']);
  });

  it('completes with the pair count on the done screen', async () => {
    const api = new FakeApi(2);
    mount(api);
    await startStudy();
    query<HTMLButtonElement>('.choice-left').click();
    await vi.waitFor(() => expect(query('#progress').textContent).toBe('1 / 2'));
    query<HTMLButtonElement>('.choice-right').click();
    await vi.waitFor(() => {
      expect(query('.done-screen').hidden).toBe(false);
    });
    expect(query('.done-summary').textContent).toContain('2 pairs');
  });

  it('never renders lambda values or file names', async () => {
    const api = new FakeApi(3);
    mount(api);
    await startStudy();
    for (const winner of ['left', 'right'] as const) {
      const html = document.body.innerHTML.toLowerCase();
      expect(html).not.toContain('lambda');
      expect(html).not.toContain('.png');
      for (const lam of ['1.6', '2.0', '2.4', '2.8']) {
        expect(html).not.toContain(lam);
      }
      query<HTMLButtonElement>(`.choice-${winner}`).click();
      await vi.waitFor(() => expect(api.votes.length).toBeGreaterThan(0));
    }
  });

  it('shows a retry banner when the server is down', async () => {
    const api = new FakeApi(3);
    api.offline = true;
    mount(api);
    query<HTMLInputElement>('#observer-name').value = 'tester';
    query<HTMLFormElement>('form.start-form').dispatchEvent(
      new Event('submit', { bubbles: true, cancelable: true }),
    );
    await vi.waitFor(() => {
      expect(query('.banner').hidden).toBe(false);
    });
    expect(query('.banner-text').textContent).toContain('server');
  });

  it('prefills the observer name from storage', () => {
    const api = new FakeApi(1);
    const storage = new Map<string, string>();
    document.body.innerHTML = '<main id="app"></main>';
    createApp(document.getElementById('app') as HTMLElement, api, {
      getItem: (k) => storage.get(k) ?? null,
      setItem: (k, v) => void storage.set(k, v),
    });
    expect(query<HTMLInputElement>('#observer-name').value).toBe('');
    storage.set('iqabench.observer', 'returning');
    document.body.innerHTML = '<main id="app"></main>';
    createApp(document.getElementById('app') as HTMLElement, api, {
      getItem: (k) => storage.get(k) ?? null,
      setItem: (k, v) => void storage.set(k, v),
    });
    expect(query<HTMLInputElement>('#observer-name').value).toBe('returning');
  });
});

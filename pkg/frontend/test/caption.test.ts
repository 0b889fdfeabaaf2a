// @vitest-environment jsdom
import { describe, expect, it } from 'vitest';

import { renderCaptionReview } from '../src/caption.js';
import type { SessionDoc } from '../src/types.js';

const session: SessionDoc = {
  session_id: 's1',
  caption: 'a blue square right on gray',
  caption_overridden: false,
  runs: [],
  sweeps: [],
  autos: [],
  image_id: 's1_orig',
  image_url: '/images/s1_orig.png',
};

describe('caption review step', () => {
  it('confirms the provider caption unchanged', () => {
    let confirmed: string | null = null;
    const root = renderCaptionReview(session, (c) => (confirmed = c));
    root.querySelector<HTMLButtonElement>('.caption-confirm')!.click();
    expect(confirmed).toBe('a blue square right on gray');
  });

  it('passes an edited caption through verbatim', () => {
    let confirmed: string | null = null;
    const root = renderCaptionReview(session, (c) => (confirmed = c));
    const input = root.querySelector<HTMLInputElement>('.caption-input')!;
    input.value = 'a photo of a dog';
    root.querySelector<HTMLButtonElement>('.caption-confirm')!.click();
    expect(confirmed).toBe('a photo of a dog');
  });

  it('rejects whitespace-only captions inline', () => {
    let confirmed: string | null = null;
    const root = renderCaptionReview(session, (c) => (confirmed = c));
    const input = root.querySelector<HTMLInputElement>('.caption-input')!;
    input.value = '   ';
    root.querySelector<HTMLButtonElement>('.caption-confirm')!.click();
    expect(confirmed).toBeNull();
    const error = root.querySelector<HTMLElement>('.caption-error')!;
    expect(error.hidden).toBe(false);
    expect(error.textContent).toContain('empty');
  });
});

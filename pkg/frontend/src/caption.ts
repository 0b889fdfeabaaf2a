/**
 * Caption review step: the first human decision. The provider's caption is
 * shown for confirmation or editing; fine-tune runs use the confirmed text
 * verbatim. Empty or whitespace-only captions are rejected inline.
 */

import type { SessionDoc } from './types.js';

export function renderCaptionReview(
  session: SessionDoc,
  onConfirm: (caption: string) => void,
): HTMLElement {
  const root = document.createElement('section');
  root.className = 'caption-review';

  const label = document.createElement('label');
  label.textContent = session.caption_overridden
    ? 'Caption (user override):'
    : 'Caption (from provider):';
  const input = document.createElement('input');
  input.type = 'text';
  input.className = 'caption-input';
  input.value = session.caption;
  label.appendChild(input);

  const error = document.createElement('span');
  error.className = 'caption-error';
  error.hidden = true;

  const confirm = document.createElement('button');
  confirm.className = 'caption-confirm';
  confirm.textContent = 'Use this caption';
  confirm.addEventListener('click', () => {
    const value = input.value;
    if (value.trim().length === 0) {
      error.textContent = 'caption must not be empty';
      error.hidden = false;
      return;
    }
    error.hidden = true;
    onConfirm(value);
  });

  root.append(label, confirm, error);
  return root;
}

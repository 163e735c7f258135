/**
 * Inline 1-5 feedback widget rendered under each answered question.
 * Locks after a successful submission; re-enables on failure so the
 * user can retry.
 */

export interface FeedbackWidgetOptions {
  entryId: string;
  prompt?: string;
  onSubmit: (score: number) => Promise<void>;
}

export function createFeedbackWidget(options: FeedbackWidgetOptions): HTMLElement {
  const container = document.createElement('div');
  container.className = 'feedback-widget';
  container.dataset.entryId = options.entryId;

  const label = document.createElement('span');
  label.className = 'feedback-label';
  label.textContent = options.prompt ?? 'Was this answer helpful? Rate it 1-5.';
  container.appendChild(label);

  const buttons: HTMLButtonElement[] = [];
  const group = document.createElement('span');
  group.className = 'feedback-scores';
  for (let score = 1; score <= 5; score++) {
    const button = document.createElement('button');
    button.type = 'button';
    button.className = 'feedback-score';
    button.textContent = String(score);
    button.addEventListener('click', () => submit(score));
    buttons.push(button);
    group.appendChild(button);
  }
  container.appendChild(group);

  function setDisabled(disabled: boolean): void {
    for (const button of buttons) button.disabled = disabled;
  }

  async function submit(score: number): Promise<void> {
    setDisabled(true);
    try {
      await options.onSubmit(score);
      container.classList.add('feedback-locked');
      label.textContent = `Thanks! You rated this answer ${score}/5.`;
      group.remove();
    } catch {
      setDisabled(false);
      label.textContent = 'Could not send your rating. Try again?';
    }
  }

  return container;
}

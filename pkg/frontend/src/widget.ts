/**
 * The chat widget: conversation view, provenance links, inline feedback,
 * and the accessibility bar (font scaling, text-to-speech, and a disabled
 * language placeholder).
 *
 * Bot message bodies are rendered with textContent, byte-for-byte as the
 * server sent them. A failed send keeps the user's message with a retry
 * button; nothing is lost on network errors.
 */

import { ApiClient } from './api.js';
import { applyFontScale, clampSteps } from './accessibility.js';
import { createFeedbackWidget } from './feedback.js';
import { ChatStore, ChatMessage } from './state.js';
import { SpeechService } from './tts.js';

export interface WidgetOptions {
  speech?: SpeechService;
  userToken?: string;
  doc?: Document;
}

export class ChatWidget {
  readonly store = new ChatStore();
  private readonly speech: SpeechService;
  private readonly doc: Document;
  private input!: HTMLInputElement;
  private sendButton!: HTMLButtonElement;
  private messageList!: HTMLElement;
  private banner!: HTMLElement;
  private closed = false;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    options: WidgetOptions = {},
  ) {
    this.speech = options.speech ?? new SpeechService();
    this.doc = options.doc ?? document;
    this.buildSkeleton();
  }

  async start(): Promise<void> {
    this.banner.hidden = true;
    try {
      const session = await this.api.openSession(
        (this.root.dataset.userToken || undefined) ?? undefined,
      );
      this.store.startSession(session.session_id, session.variant);
      const greeting = this.store.addBotMessage(session.greeting);
      this.renderMessages();
      this.speech.speakOnce(greeting.id, greeting.text);
    } catch (error) {
      this.showBanner('The assistant is not available right now.', () => this.start());
    }
  }

  async send(): Promise<void> {
    const text = this.input.value.trim();
    if (!text || !this.store.sessionId || this.closed) return;
    this.input.value = '';
    const message = this.store.addUserMessage(text);
    this.renderMessages();
    await this.deliver(message);
  }

  private async deliver(message: ChatMessage): Promise<void> {
    if (!this.store.sessionId) return;
    try {
      const reply = await this.api.sendChat(this.store.sessionId, message.text);
      this.store.markSent(message.id);
      const botMessage = this.store.addReply(reply);
      if (reply.kind === 'closing') {
        this.closed = true;
        this.input.disabled = true;
        this.sendButton.disabled = true;
      }
      this.renderMessages();
      this.speech.speakOnce(botMessage.id, botMessage.text);
    } catch (error) {
      this.store.markFailed(message.id);
      this.renderMessages();
    }
  }

  retry(messageId: number): void {
    const message = this.store.find(messageId);
    if (!message || message.status !== 'failed') return;
    message.status = 'pending';
    this.renderMessages();
    void this.deliver(message);
  }

  // --- rendering ---

  private buildSkeleton(): void {
    this.root.classList.add('votebot-widget');
    this.root.innerHTML = '';

    const bar = this.doc.createElement('div');
    bar.className = 'accessibility-bar';

    const smaller = this.button('A−', 'font-smaller', () => this.scaleFont(-1));
    const larger = this.button('A+', 'font-larger', () => this.scaleFont(+1));
    bar.append(smaller, larger);

    const ttsLabel = this.doc.createElement('label');
    ttsLabel.className = 'tts-toggle';
    const tts = this.doc.createElement('input');
    tts.type = 'checkbox';
    tts.addEventListener('change', () => this.speech.setEnabled(tts.checked));
    if (!this.speech.available) {
      tts.disabled = true;
      ttsLabel.title = 'Speech synthesis is not available in this browser';
    }
    ttsLabel.append(tts, this.doc.createTextNode(' Read answers aloud'));
    bar.appendChild(ttsLabel);

    const language = this.doc.createElement('select');
    language.className = 'language-select';
    language.disabled = true; // placeholder: translation is not available yet
    const option = this.doc.createElement('option');
    option.textContent = 'English';
    language.appendChild(option);
    bar.appendChild(language);

    this.banner = this.doc.createElement('div');
    this.banner.className = 'error-banner';
    this.banner.hidden = true;

    this.messageList = this.doc.createElement('div');
    this.messageList.className = 'messages';
    this.messageList.setAttribute('role', 'log');
    this.messageList.setAttribute('aria-live', 'polite');

    const form = this.doc.createElement('form');
    form.className = 'composer';
    form.addEventListener('submit', (event) => {
      event.preventDefault();
      void this.send();
    });
    this.input = this.doc.createElement('input');
    this.input.type = 'text';
    this.input.placeholder = 'Ask an election question…';
    this.input.setAttribute('aria-label', 'Your question');
    this.sendButton = this.doc.createElement('button');
    this.sendButton.type = 'submit';
    this.sendButton.textContent = 'Send';
    form.append(this.input, this.sendButton);

    this.root.append(bar, this.banner, this.messageList, form);
  }

  private button(text: string, className: string, onClick: () => void): HTMLButtonElement {
    const button = this.doc.createElement('button');
    button.type = 'button';
    button.className = className;
    button.textContent = text;
    button.addEventListener('click', onClick);
    return button;
  }

  private scaleFont(delta: number): void {
    this.store.fontScaleSteps = clampSteps(this.store.fontScaleSteps + delta);
    applyFontScale(this.doc, this.store.fontScaleSteps);
  }

  private showBanner(text: string, onRetry: () => void): void {
    this.banner.innerHTML = '';
    this.banner.hidden = false;
    this.banner.appendChild(this.doc.createTextNode(text + ' '));
    this.banner.appendChild(this.button('Retry', 'banner-retry', onRetry));
  }

  private renderMessages(): void {
    this.messageList.innerHTML = '';
    for (const message of this.store.messages) {
      this.messageList.appendChild(this.renderMessage(message));
    }
  }

  private renderMessage(message: ChatMessage): HTMLElement {
    const item = this.doc.createElement('div');
    item.className = `message ${message.role}`;
    if (message.kind) item.classList.add(`kind-${message.kind}`);
    item.dataset.messageId = String(message.id);

    const body = this.doc.createElement('p');
    body.className = 'body';
    body.textContent = message.text; // never synthesized or rewritten
    item.appendChild(body);

    if (message.role === 'bot' && message.sourceUrl) {
      const source = this.doc.createElement('a');
      source.className = 'source-link';
      source.href = message.sourceUrl;
      source.target = '_blank';
      source.rel = 'noopener';
      source.textContent = 'Source';
      item.appendChild(source);
    }

    if (message.status === 'failed') {
      const note = this.doc.createElement('span');
      note.className = 'failed-note';
      note.textContent = 'Not delivered.';
      item.append(note, this.button('Retry', 'retry', () => this.retry(message.id)));
    }

    if (
      message.role === 'bot' &&
      message.kind === 'answer' &&
      message.entryId &&
      this.store.canGiveFeedback(message.entryId)
    ) {
      const entryId = message.entryId;
      item.appendChild(
        createFeedbackWidget({
          entryId,
          prompt: message.feedbackPrompt,
          onSubmit: async (score) => {
            if (!this.store.sessionId || !this.store.canGiveFeedback(entryId)) {
              throw new Error('feedback already given');
            }
            await this.api.submitFeedback(this.store.sessionId, entryId, score);
            this.store.recordFeedback(entryId);
          },
        }),
      );
    }

    return item;
  }
}

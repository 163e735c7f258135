/**
 * Chat view state.
 *
 * Bot message bodies are stored exactly as the server sent them; the UI
 * never synthesizes or edits answer text. Feedback is tracked per entry id
 * so each answered question can be rated at most once per session.
 */

import type { ChatReply, ReplyKind } from './api.js';

export type MessageStatus = 'pending' | 'sent' | 'failed';

export interface ChatMessage {
  id: number;
  role: 'user' | 'bot';
  text: string;
  status: MessageStatus;
  kind?: ReplyKind;
  sourceUrl?: string;
  entryId?: string;
  feedbackPrompt?: string;
}

export class ChatStore {
  sessionId: string | null = null;
  variant: string | null = null;
  messages: ChatMessage[] = [];
  fontScaleSteps = 0;
  ttsEnabled = false;
  private nextId = 1;
  private feedbackGiven = new Set<string>();

  startSession(sessionId: string, variant: string): void {
    this.sessionId = sessionId;
    this.variant = variant;
  }

  addUserMessage(text: string): ChatMessage {
    const message: ChatMessage = {
      id: this.nextId++,
      role: 'user',
      text,
      status: 'pending',
    };
    this.messages.push(message);
    return message;
  }

  addBotMessage(text: string, kind?: ReplyKind): ChatMessage {
    const message: ChatMessage = {
      id: this.nextId++,
      role: 'bot',
      text, // verbatim server body
      status: 'sent',
      kind,
    };
    this.messages.push(message);
    return message;
  }

  addReply(reply: ChatReply): ChatMessage {
    const message = this.addBotMessage(reply.text, reply.kind);
    message.sourceUrl = reply.source_url;
    message.entryId = reply.entry_id;
    message.feedbackPrompt = reply.feedback_prompt;
    return message;
  }

  markSent(id: number): void {
    const message = this.find(id);
    if (message) message.status = 'sent';
  }

  markFailed(id: number): void {
    const message = this.find(id);
    if (message) message.status = 'failed';
  }

  find(id: number): ChatMessage | undefined {
    return this.messages.find((m) => m.id === id);
  }

  /** Feedback is allowed once per answered entry per session. */
  canGiveFeedback(entryId: string): boolean {
    return !this.feedbackGiven.has(entryId);
  }

  recordFeedback(entryId: string): void {
    this.feedbackGiven.add(entryId);
  }
}

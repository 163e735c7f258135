/**
 * Typed client for the chat service /api endpoints.
 * This is the UI's only backend coupling.
 */

export interface SessionInfo {
  session_id: string;
  greeting: string;
  variant: string;
}

export type ReplyKind = 'answer' | 'deflect' | 'fallback' | 'closing' | 'link';

export interface ChatReply {
  text: string;
  kind: ReplyKind;
  source_url?: string;
  confidence?: number;
  entry_id?: string;
  feedback_prompt?: string;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.detail === 'string') detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(private baseUrl: string = '') {}

  async openSession(userToken?: string): Promise<SessionInfo> {
    const headers: Record<string, string> = {};
    if (userToken) headers['X-User-Token'] = userToken;
    const response = await fetch(`${this.baseUrl}/api/session`, {
      method: 'POST',
      headers,
    });
    if (!response.ok) throw await parseError(response);
    return response.json();
  }

  async sendChat(sessionId: string, utterance: string): Promise<ChatReply> {
    const response = await fetch(`${this.baseUrl}/api/chat`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ session_id: sessionId, utterance }),
    });
    if (!response.ok) throw await parseError(response);
    return response.json();
  }

  async submitFeedback(sessionId: string, entryId: string, score: number): Promise<void> {
    const response = await fetch(`${this.baseUrl}/api/feedback`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ session_id: sessionId, entry_id: entryId, score }),
    });
    if (!response.ok) throw await parseError(response);
  }
}

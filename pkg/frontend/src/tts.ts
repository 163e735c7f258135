/**
 * Text-to-speech via the browser's built-in speech synthesis.
 * Each bot message is spoken at most once, keyed by message id.
 */

export interface Speakable {
  speak(utterance: SpeechSynthesisUtterance): void;
  cancel(): void;
}

type UtteranceFactory = (text: string) => SpeechSynthesisUtterance;

function defaultSynth(): Speakable | null {
  return typeof window !== 'undefined' && 'speechSynthesis' in window
    ? window.speechSynthesis
    : null;
}

function defaultFactory(): UtteranceFactory | null {
  return typeof SpeechSynthesisUtterance !== 'undefined'
    ? (text) => new SpeechSynthesisUtterance(text)
    : null;
}

export class SpeechService {
  enabled = false;
  private spoken = new Set<number>();
  private synth: Speakable | null;
  private makeUtterance: UtteranceFactory | null;

  constructor(synth?: Speakable | null, makeUtterance?: UtteranceFactory | null) {
    this.synth = synth !== undefined ? synth : defaultSynth();
    this.makeUtterance = makeUtterance !== undefined ? makeUtterance : defaultFactory();
  }

  get available(): boolean {
    return this.synth !== null && this.makeUtterance !== null;
  }

  setEnabled(on: boolean): void {
    this.enabled = on && this.available;
    if (!on && this.synth) this.synth.cancel();
  }

  /** Speak a bot message once; repeat calls for the same id are ignored. */
  speakOnce(messageId: number, text: string): boolean {
    if (!this.enabled || !this.synth || !this.makeUtterance) return false;
    if (this.spoken.has(messageId)) return false;
    this.spoken.add(messageId);
    const utterance = this.makeUtterance(text);
    utterance.rate = 0.95; // slightly slower for senior listeners
    this.synth.speak(utterance);
    return true;
  }
}

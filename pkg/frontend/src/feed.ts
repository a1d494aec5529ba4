// Live meeting feed: a pure projection of the server's event stream.
// Events are keyed by their sequence number, so replay after a reconnect is
// idempotent and the rendered order always equals the server order no matter
// how the events arrived.

import {
  CONTENT_PHASES,
  TERMINAL_PHASES,
  type EventPhase,
  type MeetingEventData,
} from './types.js';

export interface FeedTurn {
  seq: number;
  phase: EventPhase;
  speaker: string;
  content: string;
  followUps: string[];
}

export interface RoundGroup {
  round: number;
  turns: FeedTurn[];
}

export interface FeedView {
  agenda: string;
  rounds: RoundGroup[];
  finalSummary: string;
  status: 'running' | 'finished' | 'failed';
  contentTurnCount: number;
}

const FOLLOW_UP_HEADER = /FOLLOW[-\s]?UP\s+QUESTIONS\s*:/i;
const NUMBERED_ITEM = /^\s*\d+[.)]\s*(.+?)\s*$/gm;

/** Pull the numbered follow-up list out of a synthesis turn for emphasis. */
export function extractFollowUps(content: string): string[] {
  const match = FOLLOW_UP_HEADER.exec(content);
  if (!match) return [];
  const tail = content.slice(match.index + match[0].length);
  const questions: string[] = [];
  for (const item of tail.matchAll(NUMBERED_ITEM)) {
    questions.push(item[1] ?? '');
  }
  return questions.filter((q) => q.length > 0);
}

export class MeetingFeed {
  private readonly events = new Map<number, MeetingEventData>();

  /** Returns true when the event was new; duplicates are ignored. */
  add(event: MeetingEventData): boolean {
    if (this.events.has(event.seq)) return false;
    this.events.set(event.seq, event);
    return true;
  }

  get size(): number {
    return this.events.size;
  }

  ordered(): MeetingEventData[] {
    return [...this.events.values()].sort((a, b) => a.seq - b.seq);
  }

  /** Seqs currently held, for resume/gap checks. */
  seqs(): number[] {
    return this.ordered().map((e) => e.seq);
  }

  view(): FeedView {
    const rounds = new Map<number, RoundGroup>();
    let agenda = '';
    let finalSummary = '';
    let status: FeedView['status'] = 'running';
    let contentTurnCount = 0;
    for (const event of this.ordered()) {
      if (event.phase === 'meeting_started') agenda = event.content;
      if (event.phase === 'final_summary') finalSummary = event.content;
      if (TERMINAL_PHASES.has(event.phase)) {
        status = event.phase === 'meeting_finished' ? 'finished' : 'failed';
      }
      if (!CONTENT_PHASES.has(event.phase)) continue;
      contentTurnCount += 1;
      if (event.round < 1) continue; // the final summary sits outside rounds
      let group = rounds.get(event.round);
      if (!group) {
        group = { round: event.round, turns: [] };
        rounds.set(event.round, group);
      }
      group.turns.push({
        seq: event.seq,
        phase: event.phase,
        speaker: event.speaker,
        content: event.content,
        followUps: event.phase === 'synthesis' ? extractFollowUps(event.content) : [],
      });
    }
    return {
      agenda,
      rounds: [...rounds.values()].sort((a, b) => a.round - b.round),
      finalSummary,
      status,
      contentTurnCount,
    };
  }
}

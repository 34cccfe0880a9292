/** Interchange-format emission: one JSON object per line, UTF-8, LF endings.
 * The first line is a meta record pinning the tagger version. */

import { SlotValue } from './mr'
import { TaggedToken, TAGGER_ID } from './normalize'

export interface TaggedRecord {
  mr: SlotValue[]
  ref: TaggedToken[]
}

export function metaLine(): string {
  return JSON.stringify({ meta: { tool: 'tagprep', tagger: TAGGER_ID } })
}

export function recordLine(record: TaggedRecord): string {
  return JSON.stringify({
    mr: record.mr.map((sv) => [sv.slot, sv.value]),
    ref: record.ref,
  })
}

/** Serialize records to the full file contents (meta header + one line each). */
export function emit(records: TaggedRecord[]): string {
  const lines = [metaLine(), ...records.map(recordLine)]
  return lines.join('\n') + '\n'
}

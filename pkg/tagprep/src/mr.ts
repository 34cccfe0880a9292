/** Meaning-representation string parsing: "name[X], food[English], ...". */

export interface SlotValue {
  slot: string
  value: string
}

export class MrParseError extends Error {
  constructor(message: string, readonly offset: number) {
    super(`${message} (offset ${offset})`)
  }
}

/** Parse an MR string into ordered slot/value pairs, values verbatim. */
export function parseMr(mr: string): SlotValue[] {
  const out: SlotValue[] = []
  let pos = 0
  const n = mr.length
  while (pos < n) {
    while (pos < n && (mr[pos] === ' ' || mr[pos] === ',')) pos++
    if (pos >= n) break
    const open = mr.indexOf('[', pos)
    if (open < 0) throw new MrParseError('expected "[" after slot name', pos)
    const slot = mr.slice(pos, open).trim()
    if (!slot) throw new MrParseError('empty slot name', pos)
    const close = mr.indexOf(']', open)
    if (close < 0) throw new MrParseError('unbalanced bracket', open)
    out.push({ slot, value: mr.slice(open + 1, close).trim() })
    pos = close + 1
  }
  if (out.length === 0) throw new MrParseError('no slot[value] groups', 0)
  return out
}

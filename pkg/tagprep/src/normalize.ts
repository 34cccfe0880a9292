/** Reference normalization: tokenize, POS-tag, lemmatize, lowercase, and
 * drop punctuation. */

import posTagger from 'wink-pos-tagger'
import { pennToUpos } from './tags'

export type TaggedToken = [lemma: string, upos: string]

const tagger = posTagger()

export const TAGGER_ID = `wink-pos-tagger@${requireVersion()}`

function requireVersion(): string {
  // eslint-disable-next-line @typescript-eslint/no-var-requires
  return require('wink-pos-tagger/package.json').version as string
}

/** Normalize one reference sentence to (lemma, UPOS) pairs.
 *
 * Punctuation tokens are removed, lemmas are lowercased (falling back to the
 * normalized surface form when the tagger offers no lemma), and tokens that
 * are left with no alphanumeric content are dropped. Returns an empty array
 * for sentences that vanish entirely (callers skip those records).
 */
export function tagAndNormalize(ref: string): TaggedToken[] {
  const out: TaggedToken[] = []
  for (const tok of tagger.tagSentence(ref)) {
    if (tok.tag !== 'word') continue
    const upos = pennToUpos(tok.pos)
    if (upos === 'PUNCT') continue
    const lemma = (tok.lemma ?? tok.normal ?? tok.value).toLowerCase()
    if (!/[0-9a-zà-ÿ£€]/.test(lemma)) continue
    out.push([lemma, upos])
  }
  return out
}

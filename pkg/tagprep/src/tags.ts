/** Penn Treebank -> Universal POS mapping, with auxiliaries folded into VERB
 * (the downstream grouping treats VERB as one unit; UD's AUX split would
 * scatter "is"/"will" into the catch-all group). */

const PENN_TO_UPOS: Record<string, string> = {
  NN: 'NOUN', NNS: 'NOUN',
  NNP: 'PROPN', NNPS: 'PROPN',
  PRP: 'PRON', PRP$: 'PRON', WP: 'PRON', WP$: 'PRON', EX: 'PRON',
  VB: 'VERB', VBD: 'VERB', VBG: 'VERB', VBN: 'VERB', VBP: 'VERB', VBZ: 'VERB',
  MD: 'VERB', // modal auxiliaries fold into VERB
  JJ: 'ADJ', JJR: 'ADJ', JJS: 'ADJ',
  RB: 'ADV', RBR: 'ADV', RBS: 'ADV', WRB: 'ADV',
  IN: 'ADP',
  DT: 'DET', PDT: 'DET', WDT: 'DET',
  CC: 'CCONJ',
  CD: 'NUM',
  TO: 'PART', POS: 'PART', RP: 'PART',
  UH: 'INTJ',
  SYM: 'SYM', $: 'SYM', '#': 'SYM',
  FW: 'X', LS: 'X',
}

const PUNCT_PENN = new Set(['.', ',', ':', "''", '``', '-LRB-', '-RRB-', 'HYPH', 'NFP'])

export const UPOS_TAGS = new Set([
  'ADJ', 'ADP', 'ADV', 'AUX', 'CCONJ', 'DET', 'INTJ', 'NOUN', 'NUM',
  'PART', 'PRON', 'PROPN', 'PUNCT', 'SCONJ', 'SYM', 'VERB', 'X',
])

/** Coarse UPOS for a Penn tag; unknown tags land in X. */
export function pennToUpos(penn: string): string {
  if (PUNCT_PENN.has(penn)) return 'PUNCT'
  return PENN_TO_UPOS[penn] ?? 'X'
}

declare module 'wink-pos-tagger' {
  export interface WinkToken {
    value: string
    tag: string
    normal: string
    pos: string
    lemma?: string
  }
  export interface WinkTagger {
    tagSentence(sentence: string): WinkToken[]
  }
  export default function posTagger(): WinkTagger
}

#!/usr/bin/env node
/** CLI: tagprep --in trainset.csv --out train.tagged.jsonl
 *
 * Input is the official E2E release CSV (two columns: mr, ref). Output is the
 * tagged-corpus interchange JSONL. Records whose reference normalizes to
 * nothing are skipped with a warning. Output order follows input order.
 */

import * as fs from 'fs'
import Papa from 'papaparse'
import { emit, TaggedRecord } from './emit'
import { parseMr } from './mr'
import { tagAndNormalize } from './normalize'

interface CsvRow {
  mr: string
  ref: string
}

export function convert(csvText: string, warn: (msg: string) => void = console.error): string {
  const parsed = Papa.parse<CsvRow>(csvText, { header: true, skipEmptyLines: true })
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0]
    throw new Error(`CSV parse error at row ${first.row}: ${first.message}`)
  }
  const records: TaggedRecord[] = []
  parsed.data.forEach((row, idx) => {
    if (row.mr === undefined || row.ref === undefined) {
      throw new Error(`row ${idx + 1}: expected 'mr' and 'ref' columns`)
    }
    const tokens = tagAndNormalize(row.ref)
    if (tokens.length === 0) {
      warn(`tagprep: skipping row ${idx + 1}: reference empty after normalization`)
      return
    }
    records.push({ mr: parseMr(row.mr), ref: tokens })
  })
  return emit(records)
}

function main(): number {
  const args = process.argv.slice(2)
  let input = ''
  let output = ''
  for (let i = 0; i < args.length; i++) {
    if (args[i] === '--in') input = args[++i]
    else if (args[i] === '--out') output = args[++i]
    else {
      console.error(`tagprep: unknown argument ${args[i]}`)
      return 2
    }
  }
  if (!input || !output) {
    console.error('usage: tagprep --in trainset.csv --out train.tagged.jsonl')
    return 2
  }
  const csvText = fs.readFileSync(input, 'utf-8')
  fs.writeFileSync(output, convert(csvText), 'utf-8')
  return 0
}

if (require.main === module) {
  process.exit(main())
}

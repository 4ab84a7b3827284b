/**
 * Deterministic subword tokenizer.
 *
 * Words are lowercased, stripped of control/format characters, and split
 * into chunks of at most CHUNK codepoints; continuation pieces carry the
 * "##" prefix.  Every printable word yields at least one subtoken; a word
 * left empty after stripping yields zero, which callers must reject.
 */

const CHUNK = 4;

const UNSUPPORTED = /\p{C}/u;

export function tokenizeWord(word: string): string[] {
  const kept: string[] = [];
  for (const ch of word.toLowerCase()) {
    if (!UNSUPPORTED.test(ch)) kept.push(ch);
  }
  const pieces: string[] = [];
  for (let i = 0; i < kept.length; i += CHUNK) {
    const chunk = kept.slice(i, i + CHUNK).join("");
    pieces.push(i === 0 ? chunk : "##" + chunk);
  }
  return pieces;
}

export interface Alignment {
  subtokens: string[];
  /** Inclusive [start, end] subtoken range per word; covers every word exactly once. */
  tokenMap: Array<[number, number]>;
}

export function alignWords(words: string[]): Alignment {
  const subtokens: string[] = [];
  const tokenMap: Array<[number, number]> = [];
  for (let i = 0; i < words.length; i++) {
    const pieces = tokenizeWord(words[i]);
    if (pieces.length === 0) {
      throw new Error(
        `word ${i} (${JSON.stringify(words[i])}) produced no subtokens`
      );
    }
    const start = subtokens.length;
    subtokens.push(...pieces);
    tokenMap.push([start, subtokens.length - 1]);
  }
  return { subtokens, tokenMap };
}

/**
 * Whitespace tokenization for span selection.
 *
 * Tokens are maximal runs of non-whitespace, so punctuation stays attached
 * to its word. For single-spaced sentence text, joining the tokens with
 * single spaces reconstructs the text exactly; that round trip is the
 * contract the annotation view relies on when it turns a token range back
 * into a concept string.
 */

export function tokenize(text: string): string[] {
  return text.split(/\s+/).filter((token) => token.length > 0);
}

export function joinTokens(tokens: string[]): string {
  return tokens.join(" ");
}

/** Text of tokens[start..end] inclusive; bounds are the caller's problem. */
export function sliceTokens(tokens: string[], start: number, end: number): string {
  return joinTokens(tokens.slice(start, end + 1));
}

/**
 * First token range whose joined text equals `phrase`, or null.
 * Convenience for tests and for preselecting a span from query text.
 */
export function findSpan(
  tokens: string[],
  phrase: string,
): { start: number; end: number } | null {
  const wanted = tokenize(phrase);
  if (wanted.length === 0) return null;
  for (let start = 0; start + wanted.length <= tokens.length; start++) {
    let matched = true;
    for (let offset = 0; offset < wanted.length; offset++) {
      if (tokens[start + offset] !== wanted[offset]) {
        matched = false;
        break;
      }
    }
    if (matched) return { start, end: start + wanted.length - 1 };
  }
  return null;
}

/**
 * Mapping the abstract role layout onto real tokenizer output.
 *
 * Each layout item is tokenized independently; every resulting piece
 * inherits the item's role and demonstration index, so a marker that a
 * tokenizer splits into several pieces is labeled as that anchor on all
 * of them.
 */

import { DataError, LayoutItem, Role } from "./demos.js";

export interface TokenInfo {
  index: number;
  role: Role;
  ice_index: number | null;
  text: string;
}

export type ItemTokenizer = (text: string, role: Role) => string[];

export function alignLayout(
  layout: LayoutItem[],
  tokenizeItem: ItemTokenizer,
  sampleId: string,
): TokenInfo[] {
  const tokens: TokenInfo[] = [];
  for (const item of layout) {
    const pieces = tokenizeItem(item.text, item.role);
    if (pieces.length === 0 || pieces.some((p) => p.length === 0)) {
      throw new DataError(
        `sample ${sampleId}: layout item ${item.index} (${item.role}) ` +
          `tokenized to an empty piece`,
      );
    }
    for (const piece of pieces) {
      tokens.push({
        index: tokens.length,
        role: item.role,
        ice_index: item.ice_index,
        text: piece,
      });
    }
  }
  const n = tokens.length;
  if (n < 3 || tokens[n - 1].role !== "query" || tokens[n - 2].role !== "query") {
    throw new DataError(`sample ${sampleId}: layout does not end in two query tokens`);
  }
  return tokens;
}

export function segmentationRecords(tokens: TokenInfo[]) {
  return tokens.map((t) => ({ index: t.index, role: t.role, ice_index: t.ice_index }));
}

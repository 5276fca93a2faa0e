/** Per-line SMILES judgments from the reference toolkit.
 *
 * parse_ok comes from a sanitization-free parse; chem_problems is 0 when the
 * molecule fully sanitizes and 1 otherwise (the WASM build does not expose
 * the problem list, so the count is a 0/1 indicator, which is exactly what
 * the zero-problems agreement metric consumes).
 */

import { loadRDKit, RDKitModule } from "./rdkit";

export interface Judgment {
  idx: number;
  smiles: string;
  parseOk: boolean;
  chemProblems: number | null; // null when parsing failed
}

const PARSE_OPTS = JSON.stringify({ sanitize: false, kekulize: false, removeHs: false });

export function judgeOne(rdkit: RDKitModule, smiles: string): Judgment {
  const j: Judgment = { idx: -1, smiles, parseOk: false, chemProblems: null };
  if (smiles.length === 0) {
    return j; // an empty line is not a molecule
  }
  let mol = null;
  try {
    mol = rdkit.get_mol(smiles, PARSE_OPTS);
  } catch {
    mol = null;
  }
  if (mol === null) {
    return j;
  }
  mol.delete();
  j.parseOk = true;
  let sane = null;
  try {
    sane = rdkit.get_mol(smiles);
  } catch {
    sane = null;
  }
  if (sane === null) {
    j.chemProblems = 1;
  } else {
    sane.delete();
    j.chemProblems = 0;
  }
  return j;
}

export async function judgeLines(lines: string[]): Promise<{
  judgments: Judgment[];
  toolkitVersion: string;
}> {
  const rdkit = await loadRDKit();
  const judgments = lines.map((line, idx) => {
    const j = judgeOne(rdkit, line.trim());
    j.idx = idx;
    return j;
  });
  return { judgments, toolkitVersion: rdkit.version() };
}

export function toTsv(judgments: Judgment[]): string {
  const rows = ["idx\tsmiles\tparse_ok\tchem_problems"];
  for (const j of judgments) {
    const chem = j.chemProblems === null ? "" : String(j.chemProblems);
    rows.push(`${j.idx}\t${j.smiles}\t${j.parseOk ? 1 : 0}\t${chem}`);
  }
  return rows.join("\n") + "\n";
}

export function fromTsv(text: string): Judgment[] {
  const lines = text.split("\n").filter((l) => l.length > 0);
  if (lines.length === 0 || !lines[0].startsWith("idx\t")) {
    throw new Error("judgment TSV must start with the idx header row");
  }
  return lines.slice(1).map((line) => {
    const parts = line.split("\t");
    if (parts.length !== 4) {
      throw new Error(`malformed judgment row: ${line}`);
    }
    return {
      idx: Number(parts[0]),
      smiles: parts[1],
      parseOk: parts[2] === "1",
      chemProblems: parts[3] === "" ? null : Number(parts[3]),
    };
  });
}

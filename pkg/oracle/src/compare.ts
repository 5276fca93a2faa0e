/** Agreement report between two judgment TSVs over the same index set. */

import { Judgment } from "./judge";

export interface Disagreement {
  idx: number;
  smiles: string;
  kind: "parse" | "chem";
  label: string;
  a: string;
  b: string;
}

export interface AgreementReport {
  rows: number;
  parseAgreement: number;
  chemAgreement: number; // agreement on (chem_problems == 0) among shared parse-ok rows
  chemRows: number;
  disagreements: Disagreement[];
  totalDisagreements: number;
}

const DISAGREEMENT_CAP = 100;

/** Heuristic classification of known divergence families. The `a` side is
 * the in-house judgment and `b` the reference toolkit (the CLI order). */
export function classify(d: { kind: string; smiles: string; a: string; b: string }): string {
  if (d.kind === "parse") {
    return "parser-dialect";
  }
  if (d.a === "0") {
    // in-house accepts, reference objects: bare aromatic n read as pyrrole-type
    if (/n/.test(d.smiles) && !/\[nH\]/.test(d.smiles)) {
      return "aromatic-n-protonation";
    }
    return "in-house-lenient";
  }
  // in-house objects, reference accepts: per-ring electron counting and the
  // strict aromatic-ring-residency rule are the known stricter checks
  return "in-house-stricter";
}

export function compare(a: Judgment[], b: Judgment[]): AgreementReport {
  const byIdxA = new Map(a.map((j) => [j.idx, j]));
  const byIdxB = new Map(b.map((j) => [j.idx, j]));
  const missingInB = [...byIdxA.keys()].filter((i) => !byIdxB.has(i));
  const missingInA = [...byIdxB.keys()].filter((i) => !byIdxA.has(i));
  if (missingInA.length > 0 || missingInB.length > 0) {
    throw new Error(
      `index sets differ; missing in A: [${missingInA.slice(0, 20).join(", ")}]` +
        ` missing in B: [${missingInB.slice(0, 20).join(", ")}]`
    );
  }

  let parseAgree = 0;
  let chemRows = 0;
  let chemAgree = 0;
  const disagreements: Disagreement[] = [];
  let total = 0;
  const idxs = [...byIdxA.keys()].sort((x, y) => x - y);
  for (const idx of idxs) {
    const ja = byIdxA.get(idx)!;
    const jb = byIdxB.get(idx)!;
    if (ja.parseOk === jb.parseOk) {
      parseAgree += 1;
    } else {
      total += 1;
      if (disagreements.length < DISAGREEMENT_CAP) {
        const d = {
          idx,
          smiles: ja.smiles,
          kind: "parse" as const,
          label: "",
          a: ja.parseOk ? "1" : "0",
          b: jb.parseOk ? "1" : "0",
        };
        d.label = classify(d);
        disagreements.push(d);
      }
    }
    if (ja.parseOk && jb.parseOk && ja.chemProblems !== null && jb.chemProblems !== null) {
      chemRows += 1;
      const za = ja.chemProblems === 0;
      const zb = jb.chemProblems === 0;
      if (za === zb) {
        chemAgree += 1;
      } else {
        total += 1;
        if (disagreements.length < DISAGREEMENT_CAP) {
          const d = {
            idx,
            smiles: ja.smiles,
            kind: "chem" as const,
            label: "",
            a: String(ja.chemProblems),
            b: String(jb.chemProblems),
          };
          d.label = classify(d);
          disagreements.push(d);
        }
      }
    }
  }
  return {
    rows: idxs.length,
    parseAgreement: idxs.length ? parseAgree / idxs.length : 1,
    chemAgreement: chemRows ? chemAgree / chemRows : 1,
    chemRows,
    disagreements,
    totalDisagreements: total,
  };
}

export function formatReport(r: AgreementReport, toolkitVersion: string): string {
  const lines = [
    `toolkit_version = ${toolkitVersion}`,
    `rows = ${r.rows}`,
    `parse_ok_agreement = ${r.parseAgreement.toFixed(6)}`,
    `chem_zero_agreement = ${r.chemAgreement.toFixed(6)}`,
    `chem_rows = ${r.chemRows}`,
    `disagreements = ${r.totalDisagreements}`,
  ];
  if (r.disagreements.length > 0) {
    lines.push(`--- disagreements (showing ${r.disagreements.length} of ${r.totalDisagreements})`);
    lines.push("idx\tsmiles\tkind\tclass\ta\tb");
    for (const d of r.disagreements) {
      lines.push(`${d.idx}\t${d.smiles}\t${d.kind}\t${d.label}\t${d.a}\t${d.b}`);
    }
  }
  return lines.join("\n") + "\n";
}

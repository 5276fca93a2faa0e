import { describe, expect, it } from "vitest";
import { classify, compare, formatReport } from "../src/compare";
import { Judgment } from "../src/judge";

function j(idx: number, parseOk: boolean, chem: number | null, smiles = "CCO"): Judgment {
  return { idx, smiles, parseOk, chemProblems: chem };
}

describe("compare", () => {
  it("identical judgment sets agree fully", () => {
    const rows = [j(0, true, 0), j(1, false, null), j(2, true, 2)];
    const r = compare(rows, rows);
    expect(r.parseAgreement).toBe(1);
    expect(r.chemAgreement).toBe(1);
    expect(r.disagreements).toEqual([]);
    expect(r.totalDisagreements).toBe(0);
  });

  it("one flipped parse_ok in 100 rows gives 0.99", () => {
    const a = Array.from({ length: 100 }, (_, i) => j(i, true, 0));
    const b = a.map((x) => ({ ...x }));
    b[7] = j(7, false, null);
    const r = compare(a, b);
    expect(r.parseAgreement).toBeCloseTo(0.99, 12);
    expect(r.totalDisagreements).toBe(1);
    expect(r.disagreements[0].kind).toBe("parse");
  });

  it("chem agreement compares only the zero-ness of counts", () => {
    const a = [j(0, true, 2)];
    const b = [j(0, true, 1)];
    const r = compare(a, b);
    expect(r.chemAgreement).toBe(1); // both nonzero
  });

  it("flags zero-vs-nonzero chem disagreements", () => {
    const a = [j(0, true, 0), j(1, true, 1)];
    const b = [j(0, true, 1), j(1, true, 1)];
    const r = compare(a, b);
    expect(r.chemAgreement).toBeCloseTo(0.5, 12);
    expect(r.disagreements[0].kind).toBe("chem");
  });

  it("rejects mismatched index sets and lists the missing indices", () => {
    expect(() => compare([j(0, true, 0)], [j(1, true, 0)])).toThrow(/missing/);
  });

  it("caps the disagreement list at 100 rows", () => {
    const a = Array.from({ length: 300 }, (_, i) => j(i, true, 0));
    const b = a.map((x, i) => j(i, false, null));
    const r = compare(a, b);
    expect(r.totalDisagreements).toBe(300);
    expect(r.disagreements.length).toBe(100);
  });
});

describe("classification and formatting", () => {
  it("labels known divergence families", () => {
    expect(classify({ kind: "parse", smiles: "C%11CC%11", a: "1", b: "0" })).toBe("parser-dialect");
    expect(classify({ kind: "chem", smiles: "c1ccnc1", a: "0", b: "1" })).toBe("aromatic-n-protonation");
    expect(classify({ kind: "chem", smiles: "c1ccc1", a: "4", b: "0" })).toBe("in-house-stricter");
    expect(classify({ kind: "chem", smiles: "C1Ccc(C)C1", a: "2", b: "0" })).toBe("in-house-stricter");
    expect(classify({ kind: "chem", smiles: "CC(C)(C)(C)C", a: "0", b: "1" })).toBe("in-house-lenient");
  });

  it("stamps the toolkit version into the report header", () => {
    const r = compare([j(0, true, 0)], [j(0, true, 0)]);
    const text = formatReport(r, "2025.03.4");
    expect(text.startsWith("toolkit_version = 2025.03.4\n")).toBe(true);
    expect(text).toContain("parse_ok_agreement = 1.000000");
  });
});

/** CLI: `judge --in samples.smi --out judgments.tsv` and
 * `compare --a mine.tsv --b theirs.tsv --out report.txt`.
 * Exit codes: 0 ok, 1 usage, 2 runtime, 3 toolkit unavailable. */

import * as fs from "fs";
import { compare, formatReport } from "./compare";
import { fromTsv, judgeLines, toTsv } from "./judge";
import { loadRDKit, ToolkitUnavailableError } from "./rdkit";

function parseArgs(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || i + 1 >= argv.length) {
      throw new UsageError(`bad argument ${argv[i]}`);
    }
    out.set(argv[i].slice(2), argv[i + 1]);
  }
  return out;
}

class UsageError extends Error {}

async function cmdJudge(args: Map<string, string>): Promise<number> {
  const input = args.get("in");
  const output = args.get("out");
  if (!input || !output) {
    throw new UsageError("judge requires --in <samples> --out <tsv>");
  }
  const lines = fs.readFileSync(input, "utf-8").split("\n");
  if (lines[lines.length - 1] === "") {
    lines.pop();
  }
  const { judgments, toolkitVersion } = await judgeLines(lines);
  fs.writeFileSync(output, `# toolkit_version = ${toolkitVersion}\n` + toTsv(judgments));
  console.log(`${judgments.length} judgments -> ${output} (RDKit ${toolkitVersion})`);
  return 0;
}

async function cmdCompare(args: Map<string, string>): Promise<number> {
  const fileA = args.get("a");
  const fileB = args.get("b");
  const output = args.get("out");
  if (!fileA || !fileB || !output) {
    throw new UsageError("compare requires --a <tsv> --b <tsv> --out <report>");
  }
  const stripComments = (t: string) =>
    t
      .split("\n")
      .filter((l) => !l.startsWith("#"))
      .join("\n");
  const a = fromTsv(stripComments(fs.readFileSync(fileA, "utf-8")));
  const b = fromTsv(stripComments(fs.readFileSync(fileB, "utf-8")));
  const rdkit = await loadRDKit();
  const report = compare(a, b);
  const text = formatReport(report, rdkit.version());
  fs.writeFileSync(output, text);
  console.log(text.split("\n").slice(0, 6).join("\n"));
  return 0;
}

async function main(): Promise<number> {
  const [cmd, ...rest] = process.argv.slice(2);
  try {
    const args = parseArgs(rest);
    if (cmd === "judge") {
      return await cmdJudge(args);
    }
    if (cmd === "compare") {
      return await cmdCompare(args);
    }
    throw new UsageError(`unknown command ${cmd ?? "(none)"}; use judge or compare`);
  } catch (e) {
    if (e instanceof ToolkitUnavailableError) {
      console.error(`error: ${e.message}`);
      return 3;
    }
    if (e instanceof UsageError) {
      console.error(`usage error: ${e.message}`);
      return 1;
    }
    console.error(`runtime error: ${e}`);
    return 2;
  }
}

main().then((code) => {
  process.exitCode = code;
});

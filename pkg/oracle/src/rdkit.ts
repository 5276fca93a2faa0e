/** Singleton loader for the RDKit WASM module. */

export interface JSMol {
  delete(): void;
  get_smiles(): string;
}

export interface RDKitModule {
  version(): string;
  get_mol(input: string, detailsJson?: string): JSMol | null;
}

let modulePromise: Promise<RDKitModule> | null = null;

export class ToolkitUnavailableError extends Error {}

export function loadRDKit(): Promise<RDKitModule> {
  if (modulePromise === null) {
    modulePromise = (async () => {
      let init: () => Promise<RDKitModule>;
      try {
        // eslint-disable-next-line @typescript-eslint/no-var-requires
        init = require("@rdkit/rdkit");
      } catch (e) {
        throw new ToolkitUnavailableError(
          "RDKit WASM toolkit is not installed; run `npm install` in oracle/"
        );
      }
      return init();
    })();
  }
  return modulePromise;
}

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { canonicalLayout, layoutDigest, pyFloatRepr } from "../src/canonical.js";
import type { Layout } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));
const corpus: { cases: { name: string; layout: Layout; digest: string }[] } = JSON.parse(
  readFileSync(join(here, "..", "golden", "layout_cases.json"), "utf-8"),
);

const sha256hex = (bytes: Uint8Array) => createHash("sha256").update(bytes).digest("hex");

describe("layout digests match the server on the golden corpus", () => {
  for (const goldenCase of corpus.cases) {
    it(goldenCase.name, () => {
      expect(layoutDigest(goldenCase.layout, sha256hex)).toBe(goldenCase.digest);
    });
  }
});

describe("pyFloatRepr", () => {
  it("renders integral values with a trailing .0", () => {
    expect(pyFloatRepr(0)).toBe("0.0");
    expect(pyFloatRepr(1)).toBe("1.0");
    expect(pyFloatRepr(-3)).toBe("-3.0");
    expect(pyFloatRepr(-0)).toBe("-0.0");
  });

  it("renders fractional values as shortest round-trip decimals", () => {
    expect(pyFloatRepr(0.1)).toBe("0.1");
    expect(pyFloatRepr(0.30000000000000004)).toBe("0.30000000000000004");
    expect(pyFloatRepr(0.0001)).toBe("0.0001");
    expect(pyFloatRepr(0.9999)).toBe("0.9999");
  });

  it("rejects values outside the canonical range", () => {
    expect(() => pyFloatRepr(Number.NaN)).toThrow();
    expect(() => pyFloatRepr(Infinity)).toThrow();
    expect(() => pyFloatRepr(5e-5)).toThrow();
    expect(() => pyFloatRepr(1e16)).toThrow();
  });
});

describe("canonicalLayout", () => {
  it("sorts keys and uses compact separators", () => {
    const layout: Layout = {
      global_prompt: "g",
      panel_index: 2,
      bindings: [{ local_prompt: "p", box: [0, 0.25, 1, 0.75], subject_ref: null }],
    };
    expect(canonicalLayout(layout)).toBe(
      '{"bindings":[{"box":[0.0,0.25,1.0,0.75],"local_prompt":"p","subject_ref":null}],' +
        '"global_prompt":"g","panel_index":2}',
    );
  });

  it("escapes strings the way JSON requires", () => {
    const layout: Layout = {
      global_prompt: 'quote " slash \\ newline \n',
      panel_index: 1,
      bindings: [],
    };
    expect(canonicalLayout(layout)).toContain('"quote \\" slash \\\\ newline \\n"');
  });

  it("refuses non-integer panel indices", () => {
    const layout: Layout = { global_prompt: "g", panel_index: 1.5, bindings: [] };
    expect(() => canonicalLayout(layout)).toThrow();
  });
});

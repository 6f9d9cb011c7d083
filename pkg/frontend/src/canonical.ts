/** Canonical layout serialization matching the server byte for byte, so the
 * client can predict the provenance digest a committed layout will get.
 *
 * The server canonicalizes as JSON with sorted keys, no spaces, raw unicode,
 * and Python float formatting. Floats format identically in both runtimes
 * (shortest round-trip decimal) except for integral values, which the server
 * renders with a trailing `.0`, and tiny magnitudes, which switch to exponent
 * notation at different thresholds. Integral values are handled here; tiny
 * magnitudes are rejected, and the box editor snaps them to zero so committed
 * layouts never contain any. */

import type { Layout } from "./types.js";

/** Format a finite number the way the server formats a float. */
export function pyFloatRepr(value: number): string {
  if (!Number.isFinite(value)) {
    throw new Error(`non-finite value ${value} has no canonical form`);
  }
  if (Number.isInteger(value)) {
    if (Math.abs(value) >= 1e16) {
      throw new Error(`magnitude of ${value} exceeds the canonical float range`);
    }
    return Object.is(value, -0) ? "-0.0" : `${value.toFixed(1)}`;
  }
  if (Math.abs(value) < 1e-4) {
    throw new Error(`magnitude of ${value} is below the canonical float range`);
  }
  return String(value);
}

function jsonString(value: string): string {
  return JSON.stringify(value);
}

/** Serialize a layout exactly as the server's canonical JSON. */
export function canonicalLayout(layout: Layout): string {
  const bindings = layout.bindings.map((b) => {
    const box = b.box.map(pyFloatRepr).join(",");
    const subject = b.subject_ref === null ? "null" : jsonString(b.subject_ref);
    return `{"box":[${box}],"local_prompt":${jsonString(b.local_prompt)},"subject_ref":${subject}}`;
  });
  if (!Number.isInteger(layout.panel_index)) {
    throw new Error(`panel_index ${layout.panel_index} is not an integer`);
  }
  return (
    `{"bindings":[${bindings.join(",")}]` +
    `,"global_prompt":${jsonString(layout.global_prompt)}` +
    `,"panel_index":${layout.panel_index}}`
  );
}

/** Digest of the canonical form; `sha256hex` is injected because node and the
 * browser expose different hashing APIs. */
export function layoutDigest(layout: Layout, sha256hex: (utf8: Uint8Array) => string): string {
  return sha256hex(new TextEncoder().encode(canonicalLayout(layout)));
}

/**
 * Model identifiers name a deterministic hash encoder preset: embedding
 * width and number of context-mixing layers.  The identifier itself is
 * folded into the hash seed, so distinct models disagree everywhere, not
 * just in shape.
 */

export interface ModelSpec {
  id: string;
  dim: number;
  layers: number;
}

const PRESETS: Record<string, { dim: number; layers: number }> = {
  "hash-tiny": { dim: 16, layers: 2 },
  "hash-small": { dim: 32, layers: 4 },
  "hash-base": { dim: 64, layers: 6 },
};

const CUSTOM = /^hash-d(\d+)-l(\d+)$/;

export function resolveModel(id: string): ModelSpec {
  const preset = PRESETS[id];
  if (preset) return { id, ...preset };
  const m = CUSTOM.exec(id);
  if (m) {
    const dim = Number(m[1]);
    const layers = Number(m[2]);
    if (dim >= 1 && layers >= 0) return { id, dim, layers };
  }
  const known = Object.keys(PRESETS).join(", ");
  throw new Error(
    `unknown model identifier ${JSON.stringify(id)} (expected one of ${known}, or hash-d<dim>-l<layers>)`
  );
}

/** Keypoint editing: drag joints, toggle visibility, all immutable. */

import type { KeypointSet } from "./types.js";
import { keypointSetProblems } from "./validation.js";

export interface JointHit {
  setIndex: number;
  name: string;
}

/** Nearest visible joint within `tolerance`, later sets drawn on top. */
export function hitJoint(sets: KeypointSet[], x: number, y: number, tolerance = 0.03): JointHit | null {
  let best: JointHit | null = null;
  let bestDist = tolerance;
  for (let s = sets.length - 1; s >= 0; s--) {
    const set = sets[s];
    if (!set) continue;
    for (const joint of set.joints) {
      if (!joint.visible) continue;
      const dist = Math.hypot(joint.x - x, joint.y - y);
      if (dist <= bestDist) {
        best = { setIndex: s, name: joint.name };
        bestDist = dist;
      }
    }
  }
  return best;
}

function clamp01(v: number): number {
  if (v < 1e-4) return 0; // keep coordinates in the canonical float range
  if (v > 1) return 1;
  return v;
}

export function moveJoint(sets: KeypointSet[], hit: JointHit, x: number, y: number): KeypointSet[] {
  return sets.map((set, s) => {
    if (s !== hit.setIndex) return set;
    return {
      ...set,
      joints: set.joints.map((joint) =>
        joint.name === hit.name ? { ...joint, x: clamp01(x), y: clamp01(y) } : joint,
      ),
    };
  });
}

export function setJointVisible(sets: KeypointSet[], hit: JointHit, visible: boolean): KeypointSet[] {
  return sets.map((set, s) => {
    if (s !== hit.setIndex) return set;
    return {
      ...set,
      joints: set.joints.map((joint) => (joint.name === hit.name ? { ...joint, visible } : joint)),
    };
  });
}

/** Problems across all sets, prefixed with the set index the server uses. */
export function keypointProblems(sets: KeypointSet[]): string[] {
  const problems: string[] = [];
  sets.forEach((set, i) => {
    for (const message of keypointSetProblems(set)) {
      problems.push(`keypoints[${i}]: ${message}`);
    }
  });
  if (sets.length === 0) problems.push("at least one keypoint set is required");
  return problems;
}

/**
 * Model loading for the adapter. Three sources:
 *  - JSON linear spec: {"kind":"linear","coef":[...],"intercept":0}
 *  - a saved boosted-tree model file (format "geoshap-gbdt", version 1)
 *  - a JS module (.mjs/.js) exporting predict(X: number[][]): number[]
 *    and optionally nFeatures.
 */

import { readFileSync } from "node:fs";
import { pathToFileURL } from "node:url";

export interface Model {
  name: string;
  nFeatures: number;
  predict(X: number[][]): number[];
}

interface LinearSpec {
  kind: "linear";
  coef: number[];
  intercept?: number;
}

interface GbdtTree {
  feature: number[];
  threshold: number[];
  left: number[];
  right: number[];
  value: number[];
}

interface GbdtModel {
  format: "geoshap-gbdt";
  version: number;
  params: { learning_rate: number };
  n_features: number;
  base_score: number;
  trees: GbdtTree[];
}

function linearModel(spec: LinearSpec): Model {
  const coef = spec.coef.map(Number);
  const intercept = Number(spec.intercept ?? 0);
  return {
    name: "linear",
    nFeatures: coef.length,
    predict: (X) =>
      X.map((row) => row.reduce((acc, v, i) => acc + v * coef[i], intercept)),
  };
}

function treeValue(tree: GbdtTree, row: number[]): number {
  let node = 0;
  while (tree.feature[node] >= 0) {
    node = row[tree.feature[node]] <= tree.threshold[node]
      ? tree.left[node]
      : tree.right[node];
  }
  return tree.value[node];
}

function gbdtModel(spec: GbdtModel): Model {
  if (spec.version !== 1) {
    throw new Error(`unsupported gbdt model version ${spec.version}`);
  }
  const lr = spec.params.learning_rate;
  return {
    name: "gbdt",
    nFeatures: spec.n_features,
    predict: (X) =>
      X.map((row) =>
        spec.trees.reduce((acc, tree) => acc + lr * treeValue(tree, row), spec.base_score),
      ),
  };
}

export async function loadModel(source: string, nFeatures?: number): Promise<Model> {
  if (source.endsWith(".json")) {
    const raw = JSON.parse(readFileSync(source, "utf-8"));
    if (raw.kind === "linear") return linearModel(raw as LinearSpec);
    if (raw.format === "geoshap-gbdt") return gbdtModel(raw as GbdtModel);
    throw new Error(`unrecognized model JSON in ${source}`);
  }
  const mod = await import(pathToFileURL(source).href);
  const predict = mod.predict ?? mod.default?.predict;
  if (typeof predict !== "function") {
    throw new Error(`${source} does not export a predict(X) function`);
  }
  const arity = nFeatures ?? mod.nFeatures ?? mod.default?.nFeatures;
  if (!Number.isInteger(arity) || arity < 1) {
    throw new Error("feature arity unknown: pass --n-features or export nFeatures");
  }
  return { name: "module", nFeatures: arity, predict };
}

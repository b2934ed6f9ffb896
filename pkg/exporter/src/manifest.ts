/**
 * The architecture manifest: an ordered node list mirroring the BNIR node
 * kinds, where every weighted field names a checkpoint tensor (optionally
 * with the layout it is stored in).  The manifest is explicit by design;
 * no graph tracing happens here.
 */

export interface TensorSpec {
  tensor: string;
  /** conv kernels: "oihw" (native) or "hwio" (channels-last frameworks);
   *  linear kernels: "oi" (native) or "io". */
  layout?: string;
}

export type ManifestNode =
  | {
      kind: "conv2d";
      stride?: number;
      padding?: number;
      groups?: number;
      weights: TensorSpec;
      bias?: TensorSpec | null;
    }
  | {
      kind: "batch_norm";
      eps?: number;
      gamma: TensorSpec;
      beta: TensorSpec;
      running_mean: TensorSpec;
      running_var: TensorSpec;
    }
  | { kind: "activation"; fn: string; alpha?: number }
  | { kind: "pool"; pool: string; kernel: number; stride: number }
  | { kind: "global_avg_pool" }
  | { kind: "flatten" }
  | { kind: "linear"; weights: TensorSpec; bias: TensorSpec }
  | { kind: "residual_begin" }
  | { kind: "residual_end" };

export interface Manifest {
  name?: string;
  input_shape: number[];
  /** default BN eps for nodes that do not set their own */
  bn_eps?: number;
  nodes: ManifestNode[];
}

export class ManifestError extends Error {}

const NODE_KINDS = new Set([
  "conv2d",
  "batch_norm",
  "activation",
  "pool",
  "global_avg_pool",
  "flatten",
  "linear",
  "residual_begin",
  "residual_end",
]);

const ACTIVATIONS = new Set(["identity", "relu", "leaky_relu", "swish"]);

function checkTensorSpec(spec: unknown, where: string): asserts spec is TensorSpec {
  if (typeof spec !== "object" || spec === null || typeof (spec as TensorSpec).tensor !== "string") {
    throw new ManifestError(`${where}: expected {tensor: <checkpoint name>}`);
  }
}

/** Structural validation; tensor existence/shapes are checked at export. */
export function parseManifest(raw: unknown): Manifest {
  if (typeof raw !== "object" || raw === null) {
    throw new ManifestError("manifest must be a JSON object");
  }
  const m = raw as Manifest;
  if (!Array.isArray(m.input_shape) || !m.input_shape.every((d) => Number.isInteger(d) && d > 0)) {
    throw new ManifestError("manifest needs a positive integer input_shape");
  }
  if (!Array.isArray(m.nodes)) {
    throw new ManifestError("manifest needs a node list");
  }
  m.nodes.forEach((node, i) => {
    const where = `node ${i}`;
    if (typeof node !== "object" || node === null || !NODE_KINDS.has((node as { kind: string }).kind)) {
      throw new ManifestError(`${where}: unsupported node kind ${JSON.stringify((node as { kind?: unknown })?.kind)}`);
    }
    switch (node.kind) {
      case "conv2d":
        checkTensorSpec(node.weights, `${where}: conv2d weights`);
        if (node.bias != null) checkTensorSpec(node.bias, `${where}: conv2d bias`);
        break;
      case "batch_norm":
        for (const f of ["gamma", "beta", "running_mean", "running_var"] as const) {
          checkTensorSpec(node[f], `${where}: batch_norm ${f}`);
        }
        break;
      case "activation":
        if (!ACTIVATIONS.has(node.fn)) {
          throw new ManifestError(`${where}: unknown activation ${JSON.stringify(node.fn)}`);
        }
        break;
      case "pool":
        if (node.pool !== "avg" && node.pool !== "max") {
          throw new ManifestError(`${where}: pool must be avg or max`);
        }
        break;
      case "linear":
        checkTensorSpec(node.weights, `${where}: linear weights`);
        checkTensorSpec(node.bias, `${where}: linear bias`);
        break;
      default:
        break;
    }
  });
  return m;
}

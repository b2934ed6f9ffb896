/**
 * Checkpoint + manifest -> BNIR model file.
 *
 * Tensors are resolved by name, layout-fixed where the manifest says so,
 * shape-checked against the declared node, and written as 32-bit
 * little-endian blobs. Errors carry the index of the offending node.
 */

import { BlobWriter, BnirNode, buildModelFile } from "./bnir";
import { Manifest, ManifestNode, TensorSpec } from "./manifest";
import { Tensor, TensorMap, transpose } from "./tensors";

export class ExportError extends Error {
  constructor(nodeIndex: number, message: string) {
    super(`node ${nodeIndex}: ${message}`);
  }
}

const CONV_LAYOUTS: Record<string, number[] | null> = {
  oihw: null,
  hwio: [3, 2, 0, 1], // (kh, kw, in, out) -> (out, in, kh, kw)
};

const LINEAR_LAYOUTS: Record<string, number[] | null> = {
  oi: null,
  io: [1, 0],
};

function resolve(
  checkpoint: TensorMap,
  spec: TensorSpec,
  nodeIndex: number,
  layouts?: Record<string, number[] | null>
): Tensor {
  const t = checkpoint.get(spec.tensor);
  if (t === undefined) {
    throw new ExportError(nodeIndex, `checkpoint has no tensor named ${JSON.stringify(spec.tensor)}`);
  }
  if (spec.layout === undefined || layouts === undefined) return t;
  const perm = layouts[spec.layout];
  if (perm === undefined) {
    throw new ExportError(nodeIndex, `unsupported layout ${JSON.stringify(spec.layout)}`);
  }
  return perm === null ? t : transpose(t, perm);
}

function expectShape(t: Tensor, rank: number, nodeIndex: number, what: string): void {
  if (t.shape.length !== rank) {
    throw new ExportError(nodeIndex, `${what} must have rank ${rank}, got shape [${t.shape}]`);
  }
}

function expectLength(t: Tensor, len: number, nodeIndex: number, what: string): void {
  if (t.shape.length !== 1 || t.shape[0] !== len) {
    throw new ExportError(nodeIndex, `${what} must have shape [${len}], got [${t.shape}]`);
  }
}

/** Channel count produced by each node, for shape cross-checks. */
function convertNode(
  node: ManifestNode,
  i: number,
  checkpoint: TensorMap,
  blobs: BlobWriter,
  channels: number,
  defaultEps: number
): { out: BnirNode; channels: number } {
  switch (node.kind) {
    case "conv2d": {
      const w = resolve(checkpoint, node.weights, i, CONV_LAYOUTS);
      expectShape(w, 4, i, "conv2d weights");
      const groups = node.groups ?? 1;
      const [outCh, inPerGroup] = w.shape;
      if (channels > 0 && inPerGroup * groups !== channels) {
        throw new ExportError(
          i,
          `conv2d consumes ${inPerGroup * groups} channels but the graph carries ${channels}`
        );
      }
      let bias = null;
      if (node.bias != null) {
        const b = resolve(checkpoint, node.bias, i);
        expectLength(b, outCh, i, "conv2d bias");
        bias = blobs.add(b);
      }
      return {
        out: {
          kind: "conv2d",
          stride: node.stride ?? 1,
          padding: node.padding ?? 0,
          groups,
          weights: blobs.add(w),
          bias,
        },
        channels: outCh,
      };
    }
    case "batch_norm": {
      const fields = {} as Record<"gamma" | "beta" | "running_mean" | "running_var", Tensor>;
      for (const f of ["gamma", "beta", "running_mean", "running_var"] as const) {
        fields[f] = resolve(checkpoint, node[f], i);
        expectLength(fields[f], channels, i, `batch_norm ${f}`);
      }
      return {
        out: {
          kind: "batch_norm",
          eps: node.eps ?? defaultEps,
          gamma: blobs.add(fields.gamma),
          beta: blobs.add(fields.beta),
          running_mean: blobs.add(fields.running_mean),
          running_var: blobs.add(fields.running_var),
        },
        channels,
      };
    }
    case "activation":
      return {
        out: { kind: "activation", fn: node.fn, alpha: node.alpha ?? 0.01 },
        channels,
      };
    case "pool":
      return {
        out: { kind: "pool", pool: node.pool, kernel: node.kernel, stride: node.stride },
        channels,
      };
    case "global_avg_pool":
    case "flatten":
    case "residual_begin":
    case "residual_end":
      return { out: { kind: node.kind }, channels };
    case "linear": {
      const w = resolve(checkpoint, node.weights, i, LINEAR_LAYOUTS);
      expectShape(w, 2, i, "linear weights");
      const b = resolve(checkpoint, node.bias, i);
      expectLength(b, w.shape[0], i, "linear bias");
      return {
        out: { kind: "linear", weights: blobs.add(w), bias: blobs.add(b) },
        channels: w.shape[0],
      };
    }
  }
}

export function exportModel(checkpoint: TensorMap, manifest: Manifest): Buffer {
  const blobs = new BlobWriter();
  const nodes: BnirNode[] = [];
  let channels = manifest.input_shape[0];
  manifest.nodes.forEach((node, i) => {
    const converted = convertNode(node, i, checkpoint, blobs, channels, manifest.bn_eps ?? 1e-5);
    nodes.push(converted.out);
    channels = converted.channels;
  });
  return buildModelFile(manifest.name ?? "exported", manifest.input_shape, nodes, blobs);
}

/**
 * Writers for the primary toolkit's binary containers.
 *
 * Both formats: 4-byte magic | u32 LE format version | u32 LE header
 * length | UTF-8 JSON header | raw little-endian blobs in header order.
 * BNIR carries a network (f32 weights), BNDS a dataset (f32 inputs plus
 * i32 labels). Tensor references in the header are {shape, offset, size}
 * with offsets relative to the blob section.
 */

import { Tensor } from "./tensors";

export const FORMAT_VERSION = 1;

export interface TensorRef {
  shape: number[];
  offset: number;
  size: number;
}

export type BnirNode =
  | {
      kind: "conv2d";
      stride: number;
      padding: number;
      groups: number;
      weights: TensorRef;
      bias: TensorRef | null;
    }
  | {
      kind: "batch_norm";
      eps: number;
      gamma: TensorRef;
      beta: TensorRef;
      running_mean: TensorRef;
      running_var: TensorRef;
    }
  | { kind: "activation"; fn: string; alpha: number }
  | { kind: "pool"; pool: string; kernel: number; stride: number }
  | { kind: "global_avg_pool" }
  | { kind: "flatten" }
  | { kind: "linear"; weights: TensorRef; bias: TensorRef }
  | { kind: "residual_begin" }
  | { kind: "residual_end" };

export class BlobWriter {
  private parts: Buffer[] = [];
  private offset = 0;

  add(t: Tensor): TensorRef {
    const buf = Buffer.alloc(t.data.length * 4);
    const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
    for (let i = 0; i < t.data.length; i++) view.setFloat32(i * 4, t.data[i], true);
    const ref = { shape: [...t.shape], offset: this.offset, size: t.data.length };
    this.parts.push(buf);
    this.offset += buf.length;
    return ref;
  }

  addInt32(values: Int32Array): TensorRef {
    const buf = Buffer.alloc(values.length * 4);
    const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
    for (let i = 0; i < values.length; i++) view.setInt32(i * 4, values[i], true);
    const ref = { shape: [values.length], offset: this.offset, size: values.length };
    this.parts.push(buf);
    this.offset += buf.length;
    return ref;
  }

  concat(): Buffer {
    return Buffer.concat(this.parts);
  }
}

function container(magic: string, header: Record<string, unknown>, blob: Buffer): Buffer {
  const headerBytes = Buffer.from(JSON.stringify(header), "utf-8");
  const head = Buffer.alloc(12);
  head.write(magic, 0, 4, "ascii");
  head.writeUInt32LE(FORMAT_VERSION, 4);
  head.writeUInt32LE(headerBytes.length, 8);
  return Buffer.concat([head, headerBytes, blob]);
}

export function buildModelFile(
  name: string,
  inputShape: number[],
  nodes: BnirNode[],
  blobs: BlobWriter
): Buffer {
  const blob = blobs.concat();
  return container(
    "BNIR",
    {
      name,
      model_version: 1,
      input_shape: inputShape,
      nodes,
      blob_size: blob.length,
    },
    blob
  );
}

export function buildDatasetFile(
  inputs: Tensor, // (N, C, H, W)
  labels: Int32Array,
  numClasses: number
): Buffer {
  const blobs = new BlobWriter();
  const inputsRef = blobs.add(inputs);
  const labelsRef = blobs.addInt32(labels);
  const blob = blobs.concat();
  return container(
    "BNDS",
    {
      count: inputs.shape[0],
      input_shape: inputs.shape.slice(1),
      num_classes: numClasses,
      inputs: inputsRef,
      labels: labelsRef,
      blob_size: blob.length,
    },
    blob
  );
}

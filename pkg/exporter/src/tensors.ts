/**
 * Named float32 tensors and the safetensors container they travel in.
 *
 * A checkpoint is a flat name -> tensor map. The on-disk form is the
 * standard safetensors layout: an 8-byte little-endian header length,
 * a JSON header mapping each name to {dtype, shape, data_offsets}, then
 * the raw tensor bytes.
 */

export interface Tensor {
  shape: number[];
  data: Float32Array;
}

export type TensorMap = Map<string, Tensor>;

export function tensor(shape: number[], data: Float32Array | number[]): Tensor {
  const arr = data instanceof Float32Array ? data : Float32Array.from(data);
  const size = shape.reduce((a, b) => a * b, 1);
  if (arr.length !== size) {
    throw new Error(`tensor data has ${arr.length} elements, shape wants ${size}`);
  }
  return { shape: [...shape], data: arr };
}

function writeF32LE(data: Float32Array): Buffer {
  const buf = Buffer.alloc(data.length * 4);
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  for (let i = 0; i < data.length; i++) view.setFloat32(i * 4, data[i], true);
  return buf;
}

function readF32LE(buf: Buffer, count: number): Float32Array {
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) out[i] = view.getFloat32(i * 4, true);
  return out;
}

interface SafetensorsEntry {
  dtype: string;
  shape: number[];
  data_offsets: [number, number];
}

export function writeSafetensors(tensors: TensorMap): Buffer {
  const header: Record<string, SafetensorsEntry> = {};
  const blobs: Buffer[] = [];
  let offset = 0;
  for (const [name, t] of tensors) {
    const blob = writeF32LE(t.data);
    header[name] = {
      dtype: "F32",
      shape: [...t.shape],
      data_offsets: [offset, offset + blob.length],
    };
    blobs.push(blob);
    offset += blob.length;
  }
  const headerBytes = Buffer.from(JSON.stringify(header), "utf-8");
  const prefix = Buffer.alloc(8);
  prefix.writeBigUInt64LE(BigInt(headerBytes.length), 0);
  return Buffer.concat([prefix, headerBytes, ...blobs]);
}

export function readSafetensors(raw: Buffer): TensorMap {
  if (raw.length < 8) throw new Error("safetensors file too short");
  const headerLen = Number(raw.readBigUInt64LE(0));
  if (raw.length < 8 + headerLen) throw new Error("safetensors header truncated");
  const header = JSON.parse(raw.subarray(8, 8 + headerLen).toString("utf-8")) as Record<
    string,
    SafetensorsEntry
  >;
  const data = raw.subarray(8 + headerLen);
  const out: TensorMap = new Map();
  for (const [name, entry] of Object.entries(header)) {
    if (name === "__metadata__") continue;
    if (entry.dtype !== "F32") {
      throw new Error(`tensor ${name}: only F32 checkpoints are supported`);
    }
    const [start, end] = entry.data_offsets;
    if (end > data.length) throw new Error(`tensor ${name}: data out of range`);
    const count = entry.shape.reduce((a, b) => a * b, 1);
    if (end - start !== count * 4) {
      throw new Error(`tensor ${name}: byte span disagrees with its shape`);
    }
    out.set(name, tensor(entry.shape, readF32LE(data.subarray(start, end), count)));
  }
  return out;
}

/** Row-major transpose for the small layout fixups exporters do. */
export function transpose(t: Tensor, perm: number[]): Tensor {
  const rank = t.shape.length;
  if (perm.length !== rank) throw new Error("permutation rank mismatch");
  const outShape = perm.map((p) => t.shape[p]);
  const inStrides = new Array<number>(rank).fill(1);
  for (let i = rank - 2; i >= 0; i--) inStrides[i] = inStrides[i + 1] * t.shape[i + 1];
  const outStrides = new Array<number>(rank).fill(1);
  for (let i = rank - 2; i >= 0; i--) outStrides[i] = outStrides[i + 1] * outShape[i + 1];
  const out = new Float32Array(t.data.length);
  const idx = new Array<number>(rank).fill(0);
  for (let o = 0; o < out.length; o++) {
    let rem = o;
    let src = 0;
    for (let d = 0; d < rank; d++) {
      idx[d] = Math.floor(rem / outStrides[d]);
      rem %= outStrides[d];
      src += idx[d] * inStrides[perm[d]];
    }
    out[o] = t.data[src];
  }
  return { shape: outShape, data: out };
}

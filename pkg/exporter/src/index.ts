export { buildDatasetFile, buildModelFile, BlobWriter } from "./bnir";
export type { BnirNode, TensorRef } from "./bnir";
export { ExportError, exportModel } from "./export";
export { ManifestError, parseManifest } from "./manifest";
export type { Manifest, ManifestNode, TensorSpec } from "./manifest";
export { readSafetensors, tensor, transpose, writeSafetensors } from "./tensors";
export type { Tensor, TensorMap } from "./tensors";

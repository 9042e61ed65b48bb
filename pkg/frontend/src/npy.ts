// Minimal .npy v1.0 codec for little-endian float arrays in C order —
// the exact format the inference service accepts and the CLI pipeline emits.

const MAGIC = [0x93, 0x4e, 0x55, 0x4d, 0x50, 0x59]; // \x93NUMPY
const HEADER_ALIGN = 64;

export interface NpyArray {
  shape: number[];
  data: Float64Array;
}

export const encodeNpy = (
  data: Float64Array,
  shape: number[],
  dtype: 'f4' | 'f8' = 'f4',
): Uint8Array => {
  const count = shape.reduce((a, b) => a * b, 1);
  if (count !== data.length) {
    throw new Error(`shape [${shape}] needs ${count} values, got ${data.length}`);
  }
  const shapeText =
    shape.length === 0
      ? '()'
      : shape.length === 1
        ? `(${shape[0]},)`
        : `(${shape.join(', ')})`;
  const body = `{'descr': '<${dtype}', 'fortran_order': False, 'shape': ${shapeText}, }`;
  const unpadded = 6 + 2 + 2 + body.length + 1;
  const pad = (HEADER_ALIGN - (unpadded % HEADER_ALIGN)) % HEADER_ALIGN;
  const headerText = body + ' '.repeat(pad) + '\n';

  const itemSize = dtype === 'f4' ? 4 : 8;
  const out = new Uint8Array(10 + headerText.length + count * itemSize);
  out.set(MAGIC, 0);
  out[6] = 1;
  out[7] = 0;
  const view = new DataView(out.buffer);
  view.setUint16(8, headerText.length, true);
  for (let i = 0; i < headerText.length; i += 1) {
    out[10 + i] = headerText.charCodeAt(i);
  }
  let offset = 10 + headerText.length;
  for (let i = 0; i < count; i += 1) {
    if (dtype === 'f4') {
      view.setFloat32(offset, Math.fround(data[i]), true);
      offset += 4;
    } else {
      view.setFloat64(offset, data[i], true);
      offset += 8;
    }
  }
  return out;
};

const parseHeader = (text: string): { dtype: 'f4' | 'f8'; shape: number[] } => {
  const descr = /'descr':\s*'([^']+)'/.exec(text);
  const fortran = /'fortran_order':\s*(True|False)/.exec(text);
  const shapeMatch = /'shape':\s*\(([^)]*)\)/.exec(text);
  if (!descr || !fortran || !shapeMatch) {
    throw new Error('malformed .npy header');
  }
  if (descr[1] !== '<f4' && descr[1] !== '<f8') {
    throw new Error(`unsupported dtype ${descr[1]}`);
  }
  if (fortran[1] === 'True') {
    throw new Error('fortran_order arrays are not supported');
  }
  const shape = shapeMatch[1]
    .split(',')
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => {
      const n = Number(s);
      if (!Number.isInteger(n) || n < 0) throw new Error(`bad shape entry ${s}`);
      return n;
    });
  return { dtype: descr[1] === '<f4' ? 'f4' : 'f8', shape };
};

export const decodeNpy = (bytes: Uint8Array): NpyArray => {
  if (bytes.length < 10 || !MAGIC.every((b, i) => bytes[i] === b)) {
    throw new Error('not a .npy file (bad magic)');
  }
  if (bytes[6] !== 1 || bytes[7] !== 0) {
    throw new Error(`unsupported .npy version ${bytes[6]}.${bytes[7]}`);
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const headerLen = view.getUint16(8, true);
  const dataStart = 10 + headerLen;
  if (bytes.length < dataStart) throw new Error('truncated .npy header');
  let headerText = '';
  for (let i = 10; i < dataStart; i += 1) headerText += String.fromCharCode(bytes[i]);
  const { dtype, shape } = parseHeader(headerText);
  const count = shape.reduce((a, b) => a * b, 1);
  const itemSize = dtype === 'f4' ? 4 : 8;
  if (bytes.length - dataStart < count * itemSize) {
    throw new Error('truncated .npy payload');
  }
  const data = new Float64Array(count);
  for (let i = 0; i < count; i += 1) {
    data[i] =
      dtype === 'f4'
        ? view.getFloat32(dataStart + 4 * i, true)
        : view.getFloat64(dataStart + 8 * i, true);
  }
  return { shape, data };
};

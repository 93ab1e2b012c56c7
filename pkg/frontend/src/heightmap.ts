// THM1 heightmap decoding and height-colored rendering.
//
// The station pushes the newest terrain grid as a base64 binary blob
// (layout documented in PROTOCOL.md: little-endian header, float32 heights,
// validity bitmap, provenance bytes). Decoding and coloring are pure
// functions so they can be tested without a DOM; main.ts blits the returned
// RGBA buffer onto a canvas.

export interface HeightGrid {
    rows: number;
    cols: number;
    resolution: number;                 // m per cell
    origin: [number, number];           // world XY of cell [0, 0] center
    heights: Float32Array;              // row-major, NaN where invalid
    valid: Uint8Array;                  // row-major, 0 or 1
}

const MAGIC = "THM1";

export function decodeHeightmap(buf: ArrayBuffer): HeightGrid {
    const view = new DataView(buf);
    const magic = String.fromCharCode(
        view.getUint8(0), view.getUint8(1), view.getUint8(2), view.getUint8(3));
    if (magic !== MAGIC) {
        throw new Error(`not a heightmap blob (magic ${JSON.stringify(magic)})`);
    }
    const rows = view.getUint32(4, true);
    const cols = view.getUint32(8, true);
    const resolution = view.getFloat64(12, true);
    const origin: [number, number] = [
        view.getFloat64(20, true), view.getFloat64(28, true)];

    let off = 36;
    const n = rows * cols;
    if (buf.byteLength < off + 4 * n + Math.ceil(n / 8) + n) {
        throw new Error("truncated heightmap blob");
    }
    // the float payload is not guaranteed 4-byte aligned within the blob,
    // so copy instead of aliasing
    const heights = new Float32Array(n);
    for (let i = 0; i < n; i++) {
        heights[i] = view.getFloat32(off + 4 * i, true);
    }
    off += 4 * n;

    const valid = new Uint8Array(n);
    for (let i = 0; i < n; i++) {
        const byte = view.getUint8(off + (i >> 3));
        valid[i] = (byte >> (7 - (i & 7))) & 1;   // MSB first within a byte
    }
    return { rows, cols, resolution, origin, heights, valid };
}

export function decodeBase64(b64: string): ArrayBuffer {
    // browsers have atob; node (vitest) has Buffer
    if (typeof atob === "function") {
        const bin = atob(b64);
        const out = new Uint8Array(bin.length);
        for (let i = 0; i < bin.length; i++) {
            out[i] = bin.charCodeAt(i);
        }
        return out.buffer;
    }
    const buf = Buffer.from(b64, "base64");
    return buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength);
}

// ---- coloring ---------------------------------------------------------------

export const INVALID_COLOR: [number, number, number] = [40, 40, 48];

/** Deterministic blue->green->yellow ramp over [lo, hi]; integer channels. */
export function heightColor(
    h: number, lo: number, hi: number): [number, number, number] {
    const span = hi - lo;
    const t = span > 0 ? Math.min(1, Math.max(0, (h - lo) / span)) : 0.5;
    if (t < 0.5) {
        const u = t * 2;
        return [0, Math.round(90 + 130 * u), Math.round(200 - 160 * u)];
    }
    const u = (t - 0.5) * 2;
    return [Math.round(240 * u), Math.round(220 - 30 * u), Math.round(40 - 40 * u)];
}

export function heightRange(grid: HeightGrid): [number, number] {
    let lo = Infinity;
    let hi = -Infinity;
    for (let i = 0; i < grid.heights.length; i++) {
        if (!grid.valid[i]) continue;
        const h = grid.heights[i];
        if (h < lo) lo = h;
        if (h > hi) hi = h;
    }
    if (!isFinite(lo)) return [0, 0];
    return [lo, hi];
}

export interface RenderedMap {
    width: number;                      // cols
    height: number;                     // rows
    data: Uint8ClampedArray<ArrayBuffer>;   // RGBA, one pixel per cell
}

/**
 * Render one pixel per cell: valid cells get the exact heightColor of their
 * height over the grid's own range, invalid cells INVALID_COLOR. The caller
 * scales the result (nearest-neighbor) when blitting, so cell colors stay
 * pixel-accurate.
 */
export function renderHeightmap(
    grid: HeightGrid, range?: [number, number]): RenderedMap {
    const [lo, hi] = range ?? heightRange(grid);
    const data = new Uint8ClampedArray(grid.rows * grid.cols * 4);
    for (let i = 0; i < grid.rows * grid.cols; i++) {
        const [r, g, b] = grid.valid[i]
            ? heightColor(grid.heights[i], lo, hi)
            : INVALID_COLOR;
        data[4 * i] = r;
        data[4 * i + 1] = g;
        data[4 * i + 2] = b;
        data[4 * i + 3] = 255;
    }
    return { width: grid.cols, height: grid.rows, data };
}

/** World XY -> fractional cell coordinates [row, col]. */
export function worldToCell(
    grid: HeightGrid, x: number, y: number): [number, number] {
    return [
        (x - grid.origin[0]) / grid.resolution,
        (y - grid.origin[1]) / grid.resolution,
    ];
}

/* tslint:disable */
/* eslint-disable */

export class Explanation {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Mask, impacts and probabilities as JSON.
     */
    json(): string;
    /**
     * `DEMO_SIDE² * 3` bytes of overlay RGB.
     */
    rgb(): Uint8Array;
    side(): number;
}

/**
 * Runs the critical-factor search on the demo image with the spot at `(y, x)`.
 */
export function explain(y: number, x: number, cells: number, drop_threshold: number): Explanation;

/**
 * Scores a confusion matrix against the operating-point constraints.
 */
export function gate(tn: number, fp: number, fn_: number, tp: number, min_sensitivity: number, min_ppv: number): string;

/**
 * Preprocesses an 8-bit grayscale image to `side`², then draws one seeded
 * augmentation of it. Returns both images, preprocessed first, as
 * `2 * side * side` display bytes.
 */
export function preview(gray: Uint8Array, width: number, height: number, side: number, seed: bigint): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_explanation_free: (a: number, b: number) => void;
    readonly explain: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly explanation_json: (a: number) => [number, number];
    readonly explanation_rgb: (a: number) => [number, number];
    readonly explanation_side: (a: number) => number;
    readonly gate: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly preview: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;

/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_explanation_free: (a: number, b: number) => void;
export const explain: (a: number, b: number, c: number, d: number) => [number, number, number];
export const explanation_json: (a: number) => [number, number];
export const explanation_rgb: (a: number) => [number, number];
export const explanation_side: (a: number) => number;
export const gate: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const preview: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;

/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_comparison_free: (a: number, b: number) => void;
export const __wbg_demo_free: (a: number, b: number) => void;
export const comparison_block_errors: (a: number) => [number, number];
export const comparison_constellation: (a: number, b: number) => [number, number];
export const comparison_estimators: (a: number) => [number, number];
export const comparison_evm_pct: (a: number) => [number, number];
export const comparison_mse: (a: number) => [number, number];
export const demo_channel_snapshot: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demo_compare: (a: number, b: number, c: number, d: number) => [number, number, number];
export const demo_has_model: (a: number) => number;
export const demo_load_model: (a: number, b: number, c: number) => [number, number, number];
export const demo_new: () => number;
export const dmrs_autocorrelation: (a: number) => [number, number, number, number];
export const grid_shape: () => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;

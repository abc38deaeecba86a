/* tslint:disable */
/* eslint-disable */

/**
 * Result of one subframe scored by every available estimator.
 */
export class Comparison {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * 1 where the transport block failed.
     */
    block_errors(): Uint8Array;
    /**
     * Equalized symbols of estimator `i` as interleaved re/im.
     */
    constellation(i: number): Float64Array;
    estimators(): string[];
    evm_pct(): Float64Array;
    /**
     * Channel MSE against the true response.
     */
    mse(): Float64Array;
}

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `|H|` of the first antenna, symbol-major: the true response followed
     * by the interpolated raw LS estimate, each 14 x 576 values.
     */
    channel_snapshot(speed_kmph: number, snr_db: number, seed: number): Float32Array;
    compare(speed_kmph: number, snr_db: number, seed: number): Comparison;
    has_model(): boolean;
    /**
     * Loads a trained checkpoint; returns its parameter count.
     */
    load_model(bytes: Uint8Array): number;
    constructor();
}

export function dmrs_autocorrelation(root: number): Float64Array;

export function grid_shape(): Uint32Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_comparison_free: (a: number, b: number) => void;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly comparison_block_errors: (a: number) => [number, number];
    readonly comparison_constellation: (a: number, b: number) => [number, number];
    readonly comparison_estimators: (a: number) => [number, number];
    readonly comparison_evm_pct: (a: number) => [number, number];
    readonly comparison_mse: (a: number) => [number, number];
    readonly demo_channel_snapshot: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_compare: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly demo_has_model: (a: number) => number;
    readonly demo_load_model: (a: number, b: number, c: number) => [number, number, number];
    readonly demo_new: () => number;
    readonly dmrs_autocorrelation: (a: number) => [number, number, number, number];
    readonly grid_shape: () => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_drop_slice: (a: number, b: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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

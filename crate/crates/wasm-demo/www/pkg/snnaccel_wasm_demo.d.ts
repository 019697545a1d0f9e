/* tslint:disable */
/* eslint-disable */

/**
 * `[cycles, seconds]` for one classification.
 */
export function cycle_model(active_steps: number, n_exc: number, n_inh: number, total_steps: number, f_clk: number): Float64Array;

/**
 * Membrane trajectory under `v - (v >> shift)` starting from raw `v0`
 * (16-bit, 3 fractional bits). Returns `steps + 1` raw values.
 */
export function decay_trajectory(v0: number, shift: number, steps: number, strict_leak: boolean): Float64Array;

/**
 * Spike raster of `pixels` over `steps` steps, flattened step-major
 * (`out[t * pixels.len() + j]` is 1 when source `j` spiked at step `t`).
 */
export function encoder_raster(pixels: Uint8Array, single_lfsr: boolean, seed: number, steps: number): Uint8Array;

/**
 * `v0 * exp(-n * dt / tau)` for `n = 0..=steps`.
 */
export function exact_trajectory(v0: number, dt_over_tau: number, steps: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly cycle_model: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly decay_trajectory: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly encoder_raster: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly exact_trajectory: (a: number, b: number, c: number) => [number, number];
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

/* tslint:disable */
/* eslint-disable */

export class Session {
    free(): void;
    [Symbol.dispose](): void;
    data(): Float64Array;
    /**
     * Parameter error history.
     */
    eq_history(): Float64Array;
    eu_history(): Float64Array;
    n_steps(): number;
    /**
     * Desk settings for `benchmark` with the given mesh size, noise level and seed.
     */
    constructor(benchmark: string, h: number, delta: number, seed: number);
    /**
     * Relative L2 distance between the data and the noise-free state at the current step.
     */
    noise_level(): number;
    /**
     * Current parameter, one value per triangle.
     */
    parameter(): Float64Array;
    /**
     * Current state, one value per vertex.
     */
    state(): Float64Array;
    /**
     * Advances up to `n` windows; returns the number actually taken.
     */
    step(n: number): number;
    step_index(): number;
    time(): number;
    triangles(): Uint32Array;
    true_parameter(): Float64Array;
    /**
     * Interleaved `x, y` coordinates.
     */
    vertices(): Float64Array;
}

/**
 * Vertex count, triangle count, largest diameter and boundary edge count.
 */
export function mesh_stats(benchmark: string, h: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_session_free: (a: number, b: number) => void;
    readonly mesh_stats: (a: number, b: number, c: number) => [number, number, number, number];
    readonly session_data: (a: number) => [number, number];
    readonly session_eq_history: (a: number) => [number, number];
    readonly session_eu_history: (a: number) => [number, number];
    readonly session_n_steps: (a: number) => number;
    readonly session_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly session_noise_level: (a: number) => number;
    readonly session_parameter: (a: number) => [number, number];
    readonly session_state: (a: number) => [number, number];
    readonly session_step: (a: number, b: number) => [number, number, number];
    readonly session_step_index: (a: number) => number;
    readonly session_time: (a: number) => number;
    readonly session_triangles: (a: number) => [number, number];
    readonly session_true_parameter: (a: number) => [number, number];
    readonly session_vertices: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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

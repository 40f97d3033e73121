/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_session_free: (a: number, b: number) => void;
export const mesh_stats: (a: number, b: number, c: number) => [number, number, number, number];
export const session_data: (a: number) => [number, number];
export const session_eq_history: (a: number) => [number, number];
export const session_eu_history: (a: number) => [number, number];
export const session_n_steps: (a: number) => number;
export const session_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const session_noise_level: (a: number) => number;
export const session_parameter: (a: number) => [number, number];
export const session_state: (a: number) => [number, number];
export const session_step: (a: number, b: number) => [number, number, number];
export const session_step_index: (a: number) => number;
export const session_time: (a: number) => number;
export const session_triangles: (a: number) => [number, number];
export const session_true_parameter: (a: number) => [number, number];
export const session_vertices: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;

/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_simulation_free: (a: number, b: number) => void;
export const growth_rates: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const neutral_masses: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const simulation_advance: (a: number, b: number) => [number, number];
export const simulation_density: (a: number) => [number, number];
export const simulation_mass: (a: number) => number;
export const simulation_new: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
export const simulation_pheromone: (a: number) => [number, number];
export const simulation_time: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;

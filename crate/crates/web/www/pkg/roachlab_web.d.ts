/* tslint:disable */
/* eslint-disable */

/**
 * A mass-conserving 1D run started from the constant state plus seeded noise.
 */
export class Simulation {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Takes `steps` time steps; the state is left unchanged on failure.
     */
    advance(steps: number): void;
    /**
     * Total density `u1 + u2` per cell.
     */
    density(): Float64Array;
    mass(): number;
    constructor(n: number, mass: number, big_d: number, v_sharp: number, dt: number, seed: bigint);
    pheromone(): Float64Array;
    time(): number;
}

/**
 * Growth rate of each cosine mode `0..=n_max` of the constant state with mean mass `mass`.
 */
export function growth_rates(mass: number, big_d: number, v_sharp: number, n_max: number): Float64Array;

/**
 * Masses in `[lo, hi]` at which cosine mode `mode` changes stability.
 */
export function neutral_masses(mode: number, big_d: number, v_sharp: number, lo: number, hi: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_simulation_free: (a: number, b: number) => void;
    readonly growth_rates: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly neutral_masses: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly simulation_advance: (a: number, b: number) => [number, number];
    readonly simulation_density: (a: number) => [number, number];
    readonly simulation_mass: (a: number) => number;
    readonly simulation_new: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
    readonly simulation_pheromone: (a: number) => [number, number];
    readonly simulation_time: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
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

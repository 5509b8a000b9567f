/* tslint:disable */
/* eslint-disable */

/**
 * Calibrated receiver at the reference operating point.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Both signals versus applied RF field (V/m). Returns
     * `[E…, conventional…, rma…]`.
     */
    field_response(delta_p_mhz: number, delta_rf_mhz: number, e_max: number, points: number): Float64Array;
    /**
     * `velocity_points` must be odd; `layers` ≥ 1.
     */
    constructor(velocity_points: number, layers: number);
    number_density(): number;
    /**
     * Conventional and RMA signals versus probe detuning. Returns
     * `[x₀…, conventional…, rma…]` with x in MHz.
     */
    probe_spectrum(e_rf: number, delta_rf_mhz: number, omega_mod_mhz: number, span_mhz: number, points: number): Float64Array;
}

/**
 * Single stationary atom: |ρ₂₁⁽ⁿ⁾| for n = −1, 0, +1 versus probe detuning
 * under phase-modulated coupling. Rabi frequencies in MHz (cycles).
 * Returns `[x…, |ρ⁻¹|…, |ρ⁰|…, |ρ⁺¹|…]`.
 */
export function atom_harmonics(probe_mhz: number, coupling_mhz: number, rf_mhz: number, sideband_ratio: number, omega_mod_mhz: number, span_mhz: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly atom_harmonics: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly demo_field_response: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_new: (a: number, b: number) => [number, number, number];
    readonly demo_number_density: (a: number) => number;
    readonly demo_probe_spectrum: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
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

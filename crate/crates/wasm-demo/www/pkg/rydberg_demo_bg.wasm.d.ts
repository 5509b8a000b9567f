/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const atom_harmonics: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const demo_field_response: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const demo_new: (a: number, b: number) => [number, number, number];
export const demo_number_density: (a: number) => number;
export const demo_probe_spectrum: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;

/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_frameview_free: (a: number, b: number) => void;
export const costMaps: (a: number, b: number, c: number) => [number, number, number, number];
export const ellipseTable: () => [number, number, number, number];
export const frameview_height: (a: number) => number;
export const frameview_pixels: (a: number) => [number, number];
export const frameview_score: (a: number) => [number, number];
export const frameview_width: (a: number) => number;
export const renderFrame: (a: number, b: number, c: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;

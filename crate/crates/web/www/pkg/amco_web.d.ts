/* tslint:disable */
/* eslint-disable */

/**
 * Rendered frame; `pixels` holds RGBA bytes, `score` the JSON score record.
 */
export class FrameView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly height: number;
    readonly pixels: Uint8Array;
    readonly score: string;
    readonly width: number;
}

/**
 * JSON of [`Maps`]; a negative `sand_norm` leaves the history empty.
 */
export function costMaps(norm: number, xi: number, sand_norm: number): string;

export function ellipseTable(): string;

export function renderFrame(lighting: number, blur: number, seed: number): FrameView;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_frameview_free: (a: number, b: number) => void;
    readonly costMaps: (a: number, b: number, c: number) => [number, number, number, number];
    readonly ellipseTable: () => [number, number, number, number];
    readonly frameview_height: (a: number) => number;
    readonly frameview_pixels: (a: number) => [number, number];
    readonly frameview_score: (a: number) => [number, number];
    readonly frameview_width: (a: number) => number;
    readonly renderFrame: (a: number, b: number, c: number) => [number, number, number];
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

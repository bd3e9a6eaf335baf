export default class Widget {}
export const A = 1, B = 2;
export function fn() { return A + B; }
export async function afn() {}
export { A as alpha, B as beta };
export * as ns from './ns.js';
import def, * as everything from './all.js';
import {} from './empty.js';
import './side-effect.js';
const lazy = () => import('./lazy.js');
const meta = import.meta.url;

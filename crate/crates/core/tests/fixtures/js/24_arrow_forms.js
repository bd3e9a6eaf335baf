const a = () => 1;
const b = x => x;
const c = (x, y) => ({ x, y });
const d = async () => { await a(); };
const e = async x => x;
const f = async (x, { y }) => [x, y];
const g = (x = 1, ...rest) => rest.length + x;
const h = () => () => () => 'deep';
const i = [1, 2].map((n, idx) => n * idx).filter(n => n > 0);
const j = (a) ? (b) : (c);

const a = x && y || z;
const b = x ?? (y || z);
const c = !x === !!y;
const d = typeof x === 'string' ? x.length : -1;
const e = x instanceof Array && 'length' in x;
const f = ~x >>> 2 << 1 >> 1;
const g = x ** 2 + (y % 3) * -z;
let h = 0; h++; --h; h += 2; h -= 1; h *= 3; h %= 5; h <<= 1; h >>= 1; h >>>= 0; h &= 7; h |= 8; h ^= 1; h **= 2;
const i = (x, y, z);
const k = void 0 === undefined;

function* range(start, end, step = 1) {
  for (let i = start; i < end; i += step) yield i;
}
const arr = [...range(0, 10, 2)];
const merged = { ...{ a: 1 }, ...{ b: 2 } };
const max = Math.max(...arr, 100);
const copy = [...arr, ...[1, 2, 3]];
const [head, ...tail] = copy;
const fnWithRest = (...xs) => xs.reduce((s, x) => s + x, 0);
fnWithRest(...tail);

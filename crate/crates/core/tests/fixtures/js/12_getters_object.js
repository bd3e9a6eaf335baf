const config = {
  name: 'cfg',
  'quoted-key': 1,
  42: 'answer',
  [Symbol.iterator]: function* () { yield 1; },
  get value() { return this._v; },
  set value(v) { this._v = v; },
  async fetch() { return await Promise.resolve(this.name); },
  *gen() { yield 2; },
  method() { return { inner: { deep: [1, { deeper: true }] } }; },
  ...defaults,
  shorthand,
};
const defaults = { retries: 3 };
var shorthand = 'sh';
Object.freeze(config);

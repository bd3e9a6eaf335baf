class Base {
  #secret = 42;
  static instances = 0;
  static { Base.instances = 0; }
  constructor(name) { this.name = name; Base.instances++; }
  get secret() { return this.#secret; }
  set secret(v) { this.#secret = v; }
  static create(name) { return new this(name); }
  async *items() { yield this.name; }
  ['computed' + 'Key']() { return 'ck'; }
}
class Derived extends Base {
  constructor(...args) { super(...args); this.kind = "derived"; }
  toString() { return `${this.kind}:${this.name}`; }
}
const d = Derived.create('x');
module.exports = { Base, Derived, d };

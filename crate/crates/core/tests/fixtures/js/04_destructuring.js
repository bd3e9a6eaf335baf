const { a, b: { c, d: [e, , f = 10] }, ...rest } = require('./data');
let [x = 1, y = 'two', ...others] = a;
({ x, y } = { x: y, y: x });
function g({ opt = true, name: alias = 'anon' } = {}, [first] = []) {
  return [opt, alias, first];
}
const h = ({ p, q }) => p + q;
for (const [k, v] of Object.entries(rest)) { console.log(k, v); }
for (const { id } of others) console.log(id);

var x;
if (x) ; else x = 1;
with_ = { a: 1 };
for (var k in with_) if (with_.hasOwnProperty(k)) x += with_[k];
for (;;) { break; }
for (let i = 0, j = 10; i < j; i++, j--) {}
label1: { break label1; }
debugger;
throw_ = function () { throw new TypeError("t"); };
const date = new Date;
const arr = new Array(3).fill(0);
const inst = new (getClass())();
function getClass() { return class {}; }

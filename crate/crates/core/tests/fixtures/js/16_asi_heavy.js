const a = 1
const b = 2
let c = a
+ b
const d = [1, 2]
;[3, 4].forEach(n => console.log(n))
const e = function () { return 1 }
;(function () {})()
let f = a
++c
const g = `t`
function h() {
  return
}

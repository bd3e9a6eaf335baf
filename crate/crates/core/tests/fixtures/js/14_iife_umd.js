(function (root, factory) {
  if (typeof define === 'function' && define.amd) {
    define(['exports', 'b'], factory);
  } else if (typeof exports === 'object' && typeof exports.nodeName !== 'string') {
    factory(exports, require('b'));
  } else {
    factory((root.myLib = {}), root.b);
  }
}(typeof self !== 'undefined' ? self : this, function (exports, b) {
  exports.action = function () { return b.x; };
}));
!function(){ var x = 1; }();
void function(){ }();

function parse(json) {
  try {
    return JSON.parse(json);
  } catch {
    try { return eval('(' + json + ')'); } catch (e) { throw new SyntaxError('bad: ' + e.message); }
  }
}
function safe(fn, ...args) {
  try { return [null, fn(...args)]; } catch (err) { return [err, undefined]; } finally { cleanup(); }
}
function cleanup() { delete globalThis.__tmp; }

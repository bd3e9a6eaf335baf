function classify(token) {
  outer: for (let i = 0; i < token.length; i++) {
    switch (token[i]) {
      case 'a':
      case 'b':
        continue outer;
      case "c": {
        const v = { c: true };
        if (v.c) break outer;
        break;
      }
      default:
        token = token.slice(1);
    }
  }
  do { token += '.'; } while (token.length < 3);
  while (false) {}
  return token;
}
module.exports.classify = classify;

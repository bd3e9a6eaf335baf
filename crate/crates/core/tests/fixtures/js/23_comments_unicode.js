/**
 * Doc comment with `code` and 'quotes' and "double"
 */
// line comment with require('not-real')
const café = 'crème brûlée'; /* inline */ const naïve = "日本語";
const emoji = '😀 smile';
const esc = '\u0041\x42\n\t\'';
const \u0061bc = 1;
/* multi
   line */ const after = abc + 1;

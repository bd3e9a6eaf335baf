import * as vscode from 'vscode';
import { readFile } from 'node:fs/promises';
import path, { join as pjoin } from 'path';
export * from './util.js';
export { helper as default } from './helper.js';

export async function activate(context) {
  const root = vscode.workspace.workspaceFolders?.[0]?.uri.fsPath ?? '';
  const text = await readFile(pjoin(root, 'README.md'), 'utf8');
  const lines = text.split('\n').filter(Boolean);
  context.globalState.update('lines', lines.length);
  return { root, count: lines.length, base: path.basename(root) };
}

export const deactivate = () => {};

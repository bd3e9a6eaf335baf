const vscode = require('vscode');
const path = require('path');
class Provider {
  constructor(ctx) { this.ctx = ctx; this._onDidChange = new vscode.EventEmitter(); this.onDidChangeTreeData = this._onDidChange.event; }
  getTreeItem(el) { return el; }
  getChildren() {
    const folders = vscode.workspace.workspaceFolders || [];
    return folders.map(f => new vscode.TreeItem(f.name, vscode.TreeItemCollapsibleState.None));
  }
  refresh() { this._onDidChange.fire(); }
}
function activate(context) {
  const provider = new Provider(context);
  vscode.window.registerTreeDataProvider('demoView', provider);
  const status = vscode.window.createStatusBarItem(vscode.StatusBarAlignment.Left, 100);
  status.text = '$(sync) Demo';
  status.command = 'demo.refresh';
  status.show();
  context.subscriptions.push(status, vscode.commands.registerCommand('demo.refresh', () => provider.refresh()));
  const cfg = vscode.workspace.getConfiguration('demo');
  if (cfg.get('verbose')) console.log(path.join(context.extensionPath, 'media'));
}
module.exports = { activate };

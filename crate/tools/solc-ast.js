#!/usr/bin/env node
// Minimal stand-in for `solc --ast-compact-json <file.sol>...` backed by solcjs.
// Usage:
//   solc-ast.js --ast-compact-json a.sol [b.sol ...]   print solc-style sections
//   solc-ast.js --emit a.sol [...]                     write a.ast.json next to each input
const fs = require('fs');
const path = require('path');

let solc;
try {
  solc = require('solc');
} catch (e) {
  solc = require(path.join(process.env.SOLCJS_HOME || '/tmp/solcjs', 'node_modules', 'solc'));
}

const args = process.argv.slice(2);
const emit = args.includes('--emit');
const files = args.filter((a) => !a.startsWith('--'));
if (files.length === 0) {
  console.error('usage: solc-ast.js (--ast-compact-json|--emit) <file.sol>...');
  process.exit(2);
}

let failed = false;
for (const file of files) {
  const name = path.basename(file);
  const input = {
    language: 'Solidity',
    sources: { [name]: { content: fs.readFileSync(file, 'utf8') } },
    settings: { outputSelection: { '*': { '': ['ast'] } } },
  };
  const out = JSON.parse(solc.compile(JSON.stringify(input)));
  const errors = (out.errors || []).filter((e) => e.severity === 'error');
  if (errors.length > 0) {
    for (const e of errors) console.error(e.formattedMessage);
    failed = true;
    continue;
  }
  const ast = out.sources[name].ast;
  if (emit) {
    const target = file.replace(/\.sol$/, '.ast.json');
    fs.writeFileSync(target, JSON.stringify(ast) + '\n');
  } else {
    process.stdout.write('JSON AST (compact format):\n\n\n======= ' + file + ' =======\n');
    process.stdout.write(JSON.stringify(ast) + '\n');
  }
}
process.exit(failed ? 1 : 0);

#!/usr/bin/env node
// Thin launcher for the compiled runner (run `npm run build` first).
"use strict";
const { main } = require("./dist/runner.js");
process.exit(main(process.argv.slice(2)));

import { parseArgs } from "node:util";
import { renderPhaseScan } from "./figures";

const USAGE = "usage: plot_phase_scan <scan.csv> [more.csv ...] --out fig.svg [--marker 0.7055]";

function main() {
  const { values, positionals } = parseArgs({
    allowPositionals: true,
    options: {
      out: { type: "string" },
      marker: { type: "string" },
    },
  });
  if (!values.out || positionals.length === 0) {
    console.error(USAGE);
    process.exit(2);
  }
  let marker: number | undefined;
  if (values.marker !== undefined) {
    marker = Number(values.marker);
    if (Number.isNaN(marker)) {
      console.error(`bad --marker value: ${values.marker}`);
      process.exit(2);
    }
  }
  renderPhaseScan({ inputs: positionals, out: values.out, marker });
  console.log(`wrote ${values.out}`);
}

try {
  main();
} catch (err) {
  console.error(String(err));
  process.exit(1);
}

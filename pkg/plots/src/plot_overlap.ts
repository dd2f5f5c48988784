import { parseArgs } from "node:util";
import { renderOverlap } from "./figures";

// default marker: the weight where the overlap curve collapses, g = 1/sqrt(2)
const USAGE = "usage: plot_overlap <overlap.csv> [more.csv ...] --out fig.svg [--marker g]";

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
  let marker = Math.SQRT1_2;
  if (values.marker !== undefined) {
    marker = Number(values.marker);
    if (Number.isNaN(marker)) {
      console.error(`bad --marker value: ${values.marker}`);
      process.exit(2);
    }
  }
  renderOverlap({ inputs: positionals, out: values.out, marker });
  console.log(`wrote ${values.out}`);
}

try {
  main();
} catch (err) {
  console.error(String(err));
  process.exit(1);
}

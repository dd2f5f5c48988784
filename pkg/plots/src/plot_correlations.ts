import { parseArgs } from "node:util";
import { renderCorrelations } from "./figures";
import { AxesMode } from "./svg";

const USAGE =
  "usage: plot_correlations <scan.csv> [more.csv ...] --out fig.svg [--axes loglog|linlog|linear] [--slopes 0.1595,0.2521]";

function main() {
  const { values, positionals } = parseArgs({
    allowPositionals: true,
    options: {
      out: { type: "string" },
      axes: { type: "string", default: "loglog" },
      slopes: { type: "string" },
    },
  });
  if (!values.out || positionals.length === 0) {
    console.error(USAGE);
    process.exit(2);
  }
  if (!["loglog", "linlog", "linear"].includes(values.axes as string)) {
    console.error(USAGE);
    process.exit(2);
  }
  let slopes: number[] | undefined;
  if (values.slopes !== undefined) {
    slopes = values.slopes.split(",").map(Number);
    if (slopes.some((s) => Number.isNaN(s))) {
      console.error(`bad --slopes value: ${values.slopes}`);
      process.exit(2);
    }
  }
  renderCorrelations({
    inputs: positionals,
    out: values.out,
    axes: values.axes as AxesMode,
    slopes,
  });
  console.log(`wrote ${values.out}`);
}

try {
  main();
} catch (err) {
  console.error(String(err));
  process.exit(1);
}

export {
  Diagnostics,
  MalformedCsvError,
  MissingColumnError,
  getColumn,
  parseDiagnostics,
  periodColumns,
} from "./csv.js";
export { DecayFit, fitDecayRate } from "./fit.js";
export {
  ColumnResult,
  DEFAULT_DECAY_COLUMNS,
  DecayFigure,
  buildDecayFigure,
} from "./decay.js";
export { PeriodsFigure, buildPeriodsFigure } from "./periods.js";

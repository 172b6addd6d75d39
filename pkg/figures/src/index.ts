export * from "./csv.js";
export * from "./svg.js";
export * from "./figures.js";
export { main } from "./cli.js";

/** Slope utilities on log-log data. */

export function pairSlope(h0: number, e0: number, h1: number, e1: number): number {
  return Math.log(e0 / e1) / Math.log(h0 / h1);
}

/** Least-squares slope of log(e) against log(h). */
export function fitSlope(hs: number[], es: number[]): number {
  if (hs.length !== es.length || hs.length < 2) {
    throw new Error("need at least two matching samples");
  }
  const x = hs.map(Math.log);
  const y = es.map(Math.log);
  const n = x.length;
  const mx = x.reduce((a, b) => a + b, 0) / n;
  const my = y.reduce((a, b) => a + b, 0) / n;
  let num = 0;
  let den = 0;
  for (let i = 0; i < n; i++) {
    num += (x[i] - mx) * (y[i] - my);
    den += (x[i] - mx) * (x[i] - mx);
  }
  return num / den;
}

/** Slope between the two finest (smallest-h) samples. */
export function finestPairSlope(hs: number[], es: number[]): number {
  const order = hs.map((_, i) => i).sort((a, b) => hs[b] - hs[a]);
  const i0 = order[order.length - 2];
  const i1 = order[order.length - 1];
  return pairSlope(hs[i0], es[i0], hs[i1], es[i1]);
}

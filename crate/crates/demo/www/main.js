// Expects the wasm-bindgen output (target web) in ./pkg.
import init, { skin_depth_curve, mesh_stats, mini_scan } from "./pkg/ectfem_demo.js";

const $ = (id) => document.getElementById(id);

function plot(canvas, xs, series) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 30;
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => s.ys);
  const lo = Math.min(...all), hi = Math.max(...all);
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - lo) / (hi - lo || 1)) * (h - 2 * pad);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(s.ys[i])) : ctx.moveTo(sx(x), sy(s.ys[i]))));
    ctx.stroke();
  }
}

function rows(flat, width) {
  const out = [];
  for (let i = 0; i < flat.length; i += width) out.push(Array.from(flat.slice(i, i + width)));
  return out;
}

function guard(out, f) {
  try {
    f();
  } catch (e) {
    $(out).textContent = String(e);
  }
}

await init();

$("sd-run").onclick = () => guard("sd-out", () => {
  const r = rows(skin_depth_curve(+$("sd-sigma").value, +$("sd-mu").value, 1e2, 1e7, 60), 4);
  plot($("sd-plot"), r.map((v) => Math.log10(v[0])), [{ ys: r.map((v) => Math.log10(v[1])), color: "#06c" }]);
  const mid = r[Math.floor(r.length / 2)];
  $("sd-out").textContent = `log10 δ against log10 f; at ${mid[0].toExponential(3)} Hz δ = ${mid[1].toExponential(4)} m`;
});

$("m-run").onclick = () => guard("m-out", () => {
  $("m-out").textContent = mesh_stats(+$("m-ax").value, +$("m-seg").value, $("m-tsp").checked);
});

$("s-run").onclick = () => guard("s-out", () => {
  $("s-out").textContent = "running...";
  setTimeout(() => guard("s-out", () => {
    const r = rows(mini_scan(+$("s-sigma").value, +$("s-f").value, 4e-3, +$("s-n").value), 5);
    plot($("s-plot"), r.map((v) => v[0]), [
      { ys: r.map((v) => Math.hypot(v[1], v[2])), color: "#c30" },
      { ys: r.map((v) => Math.hypot(v[3], v[4])), color: "#090" },
    ]);
    $("s-out").textContent = "z (m)       |Z_FA|        |Z_F3|\n" + r
      .map((v) => `${v[0].toExponential(2)}  ${Math.hypot(v[1], v[2]).toExponential(4)}  ${Math.hypot(v[3], v[4]).toExponential(4)}`)
      .join("\n");
  }), 0);
});

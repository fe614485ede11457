import init, { Demo, bpa, softmin } from "./pkg/fuzzy_evidence_web.js";

const $ = (id) => document.getElementById(id);
const numbers = (s) => s.split(",").map((t) => Number(t.trim())).filter((v) => !Number.isNaN(v));

function paint(canvas, rgba, w, h) {
  canvas.width = w;
  canvas.height = h;
  canvas.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), w, h), 0, 0);
}

function runScene() {
  const out = $("summary");
  out.className = "";
  out.textContent = "running...";
  // Let the status text render before the blocking call.
  setTimeout(() => {
    try {
      const demo = new Demo(
        Number($("size").value),
        Number($("noise").value),
        Number($("per-class").value),
        Number($("kw").value),
        $("mode").value,
        Number($("seed").value),
      );
      const [w, h] = [demo.width, demo.height];
      paint($("truth"), demo.truth_rgba(), w, h);
      paint($("direct"), demo.direct_rgba(), w, h);
      paint($("evidential"), demo.evidential_rgba(), w, h);
      const s = JSON.parse(demo.summary());
      $("direct-cap").textContent = `direct: ${(100 * s.direct_error).toFixed(2)}% error`;
      $("evidential-cap").textContent = `evidential: ${(100 * s.evidential_error).toFixed(2)}% error`;
      out.textContent = JSON.stringify(s, null, 2);
      demo.free();
    } catch (e) {
      out.className = "err";
      out.textContent = String(e);
    }
  }, 10);
}

function updateBpa() {
  const out = $("bpa-out");
  try {
    const view = JSON.parse(bpa(numbers($("cm0").value), numbers($("cmi").value), $("bpa-mode").value));
    const f = (v) => v.toFixed(6);
    const lines = view.singletons.map((m, k) => `m({C${k + 1}})        = ${f(m)}`);
    for (const p of view.pairs) lines.push(`m({C${p.classes[0]},C${p.classes[1]}})     = ${f(p.mass)}`);
    lines.push(`m(frame)        = ${f(view.frame)}`);
    lines.push("");
    view.pignistic.forEach((p, k) => lines.push(`BetP(C${k + 1})       = ${f(p)}`));
    lines.push(`decision: C${view.decision}`);
    out.className = "";
    out.textContent = lines.join("\n");
  } catch (e) {
    out.className = "err";
    out.textContent = String(e);
  }
}

function updateCurve() {
  const canvas = $("curve");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const values = numbers($("sm-values").value);
  const [q0, q1] = [Number($("q-from").value), Number($("q-to").value)];
  let ys;
  try {
    ys = softmin(values, q0, q1, 200);
  } catch (e) {
    ctx.fillStyle = "#b00020";
    ctx.fillText(String(e), 10, 20);
    return;
  }
  const pad = 20;
  const y = (v) => canvas.height - pad - v * (canvas.height - 2 * pad);
  const x = (i) => pad + (i / (ys.length - 1)) * (canvas.width - 2 * pad);
  ctx.strokeStyle = "#bbb";
  ctx.setLineDash([4, 4]);
  ctx.beginPath();
  ctx.moveTo(pad, y(Math.min(...values)));
  ctx.lineTo(canvas.width - pad, y(Math.min(...values)));
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.strokeStyle = "#2a9d8f";
  ctx.beginPath();
  ys.forEach((v, i) => (i ? ctx.lineTo(x(i), y(v)) : ctx.moveTo(x(i), y(v))));
  ctx.stroke();
  ctx.fillStyle = "#222";
  ctx.fillText(`q = ${q0}`, pad, canvas.height - 4);
  ctx.fillText(`q = ${q1}`, canvas.width - pad - 50, canvas.height - 4);
}

await init();
$("run").addEventListener("click", runScene);
for (const id of ["cm0", "cmi", "bpa-mode"]) $(id).addEventListener("input", updateBpa);
for (const id of ["sm-values", "q-from", "q-to"]) $(id).addEventListener("input", updateCurve);
updateBpa();
updateCurve();
runScene();

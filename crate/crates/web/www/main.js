import init, { growth_rates, neutral_masses, Simulation } from "./pkg/roachlab_web.js";

const N_MODES = 12;
const CELLS = 128;
const DT = 2e-3;
const STEPS_PER_FRAME = 25;

const $ = (id) => document.getElementById(id);
const slider = (id) => parseFloat($(id).value);

let sim = null;
let running = true;

function params() {
  return { mass: slider("mass"), bigD: slider("bigd"), vSharp: slider("vsharp") };
}

function axes(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
}

function drawRates() {
  const { mass, bigD, vSharp } = params();
  $("mass-out").textContent = mass.toFixed(3);
  $("bigd-out").textContent = bigD.toFixed(3);
  $("vsharp-out").textContent = vSharp.toFixed(2);
  const canvas = $("rates");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  axes(ctx, w, h, pad);
  let rates;
  try {
    rates = growth_rates(mass, bigD, vSharp, N_MODES);
  } catch (err) {
    $("roots").textContent = String(err);
    return;
  }
  const top = Math.max(...rates.map(Math.abs), 1e-6);
  const y = (r) => h / 2 - (r / top) * (h / 2 - pad);
  ctx.strokeStyle = "#bbb";
  ctx.beginPath();
  ctx.moveTo(pad, h / 2);
  ctx.lineTo(w - pad, h / 2);
  ctx.stroke();
  const bar = (w - 2 * pad) / rates.length;
  rates.forEach((r, n) => {
    ctx.fillStyle = r > 0 ? "#c0392b" : "#2c7fb8";
    const x = pad + n * bar + 2;
    ctx.fillRect(x, Math.min(y(r), h / 2), bar - 4, Math.abs(y(r) - h / 2));
    ctx.fillStyle = "#333";
    ctx.fillText(String(n), x + bar / 2 - 5, h - pad + 14);
  });
  const lines = [];
  for (let n = 1; n <= 3; n++) {
    const roots = neutral_masses(n, bigD, vSharp, 0.1, 2.5);
    lines.push(`mode ${n}: M = ${roots.length ? Array.from(roots, (m) => m.toFixed(4)).join(", ") : "none"}`);
  }
  $("roots").textContent = "neutral masses, " + lines.join("; ");
}

function restart() {
  const { mass, bigD, vSharp } = params();
  try {
    sim = new Simulation(CELLS, mass, bigD, vSharp, DT, BigInt($("seed").value || 0));
  } catch (err) {
    sim = null;
    $("status").textContent = String(err);
  }
}

function drawProfile() {
  const canvas = $("profile");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  axes(ctx, w, h, pad);
  const u = sim.density();
  const v = sim.pheromone();
  const top = Math.max(...u, ...v) * 1.05;
  const plot = (values, colour) => {
    ctx.strokeStyle = colour;
    ctx.beginPath();
    values.forEach((val, i) => {
      const px = pad + ((i + 0.5) / values.length) * (w - 2 * pad);
      const py = h - pad - (val / top) * (h - 2 * pad);
      i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
    });
    ctx.stroke();
  };
  plot(u, "#c0392b");
  plot(v, "#27ae60");
  ctx.fillStyle = "#c0392b";
  ctx.fillText("u1 + u2", w - pad - 60, pad);
  ctx.fillStyle = "#27ae60";
  ctx.fillText("v", w - pad - 60, pad + 14);
  $("status").textContent = `t = ${sim.time().toFixed(2)}   mass = ${sim.mass().toFixed(10)}`;
}

function frame() {
  if (running && sim) {
    try {
      sim.advance(STEPS_PER_FRAME);
    } catch (err) {
      running = false;
      $("status").textContent = String(err);
    }
  }
  if (sim) drawProfile();
  requestAnimationFrame(frame);
}

await init();
for (const id of ["mass", "bigd", "vsharp"]) {
  $(id).addEventListener("input", drawRates);
  $(id).addEventListener("change", restart);
}
$("start").addEventListener("click", () => { running = true; restart(); });
$("pause").addEventListener("click", () => {
  running = !running;
  $("pause").textContent = running ? "Pause" : "Resume";
});
drawRates();
restart();
requestAnimationFrame(frame);

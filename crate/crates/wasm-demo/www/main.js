import init, { sphereView, sensitivityView, spdView } from "./pkg/geodp_wasm.js";

const num = (form, name) => Number(form.elements[name].value);

// sphere: orthographic projection after a rotation about the vertical axis
let sphereData = null;

function project([x, y, z], angle) {
  const c = Math.cos(angle), s = Math.sin(angle);
  return { u: c * x + s * y, v: z, depth: -s * x + c * y };
}

function drawSphere() {
  const canvas = document.getElementById("sphere");
  const ctx = canvas.getContext("2d");
  const r = canvas.width / 2 - 20, cx = canvas.width / 2, cy = canvas.height / 2;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#bbb";
  ctx.beginPath();
  ctx.arc(cx, cy, r, 0, 2 * Math.PI);
  ctx.stroke();
  if (!sphereData) return;
  const angle = (Number(document.getElementById("sphere-angle").value) * Math.PI) / 180;
  const toScreen = (p) => {
    const q = project(p, angle);
    return [cx + r * q.u, cy - r * q.v, q.depth];
  };
  const path = (points, color, width) => {
    ctx.strokeStyle = color;
    ctx.lineWidth = width;
    ctx.beginPath();
    points.forEach((p, i) => {
      const [x, y, d] = toScreen(p);
      ctx.globalAlpha = d >= 0 ? 1 : 0.3;
      i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
    ctx.globalAlpha = 1;
  };
  for (const rel of sphereData.releases) path(rel.curve, "rgba(214, 96, 77, 0.7)", 1.5);
  path(sphereData.fit, "#2166ac", 3);
  sphereData.y.forEach((p, i) => {
    const [x, y, d] = toScreen(p);
    const t = sphereData.x[i];
    ctx.fillStyle = `rgba(${Math.round(40 + 180 * t)}, 120, ${Math.round(220 - 180 * t)}, ${d >= 0 ? 1 : 0.3})`;
    ctx.beginPath();
    ctx.arc(x, y, 3, 0, 2 * Math.PI);
    ctx.fill();
  });
}

function runSphere(event) {
  event?.preventDefault();
  const f = document.getElementById("sphere-form");
  const info = document.getElementById("sphere-info");
  try {
    sphereData = JSON.parse(
      sphereView(num(f, "n"), num(f, "delta"), num(f, "eps_p"), num(f, "eps_v"), num(f, "count"), num(f, "seed")),
    );
    const mses = sphereData.releases.map((r) => r.mse);
    const mean = mses.reduce((a, b) => a + b, 0) / mses.length;
    info.textContent = [
      `tau = ${sphereData.tau.toFixed(4)}, sigma_p = ${sphereData.sigma_p.toExponential(3)}, sigma_v = ${sphereData.sigma_v.toExponential(3)}`,
      `non-private MSE ${sphereData.baseline_mse.toExponential(3)}, mean private MSE ${mean.toExponential(3)}`,
      ...sphereData.warnings,
    ].join("\n");
  } catch (e) {
    sphereData = null;
    info.textContent = String(e);
  }
  drawSphere();
}

// sensitivity curves
const COLORS = ["#2166ac", "#4d9221", "#d6604d"];

function drawSensitivity() {
  const f = document.getElementById("sens-form");
  const canvas = document.getElementById("sens");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  let view;
  try {
    view = JSON.parse(sensitivityView(num(f, "n"), num(f, "tau_m"), num(f, "tau_max"), 101));
  } catch (e) {
    ctx.fillText(String(e), 20, 20);
    return;
  }
  const which = f.elements.which.value;
  const pad = { l: 70, r: 20, t: 20, b: 40 };
  const w = canvas.width - pad.l - pad.r, h = canvas.height - pad.t - pad.b;
  const xmax = view.tau[view.tau.length - 1];
  const ymax = Math.max(...view.curves.flatMap((c) => c[which])) || 1;
  const X = (t) => pad.l + (w * t) / xmax, Y = (d) => pad.t + h - (h * d) / ymax;

  ctx.strokeStyle = "#888";
  ctx.lineWidth = 1;
  ctx.strokeRect(pad.l, pad.t, w, h);
  ctx.fillStyle = "#444";
  ctx.font = "12px system-ui";
  ctx.fillText("τ", pad.l + w / 2, canvas.height - 8);
  ctx.fillText(xmax.toFixed(2), pad.l + w - 20, pad.t + h + 16);
  ctx.fillText("0", pad.l - 12, pad.t + h + 4);
  ctx.fillText(ymax.toExponential(2), 4, pad.t + 10);

  view.curves.forEach((c, k) => {
    ctx.strokeStyle = COLORS[k];
    ctx.lineWidth = 2;
    ctx.beginPath();
    view.tau.forEach((t, i) => (i === 0 ? ctx.moveTo(X(t), Y(c[which][i])) : ctx.lineTo(X(t), Y(c[which][i]))));
    ctx.stroke();
    ctx.fillStyle = COLORS[k];
    ctx.fillText(c.label, pad.l + 10, pad.t + 18 + 16 * k);
  });
}

// SPD ellipses laid out along the covariate axis
function runSpd(event) {
  event?.preventDefault();
  const f = document.getElementById("spd-form");
  const canvas = document.getElementById("spd");
  const ctx = canvas.getContext("2d");
  const info = document.getElementById("spd-info");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  let view;
  try {
    view = JSON.parse(spdView(num(f, "n"), num(f, "sigma"), num(f, "eps"), num(f, "seed")));
  } catch (e) {
    info.textContent = String(e);
    return;
  }
  const all = [...view.data, ...view.fit, ...view.private];
  const extent = Math.max(...all.flatMap((e) => e.outline.flatMap(([x, y]) => [Math.abs(x), Math.abs(y)])));
  const rows = [
    ["data", view.data, "rgba(120, 120, 120, 0.6)"],
    ["least squares", view.fit, "#2166ac"],
    ["private", view.private, "#d6604d"],
  ];
  const rowH = canvas.height / rows.length;
  const left = 110, width = canvas.width - left - 40;
  const scale = Math.min(rowH / 2 - 8, 40) / extent;
  ctx.font = "12px system-ui";
  rows.forEach(([label, ellipses, color], k) => {
    const cy = rowH * (k + 0.5);
    ctx.fillStyle = "#444";
    ctx.fillText(label, 8, cy + 4);
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    for (const e of ellipses) {
      const cx = left + 20 + e.x * width;
      ctx.beginPath();
      e.outline.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(cx + scale * x, cy - scale * y) : ctx.lineTo(cx + scale * x, cy - scale * y)));
      ctx.stroke();
    }
  });
  info.textContent = [
    `non-private MSE ${view.baseline_mse.toExponential(3)}, private MSE ${view.private_mse.toExponential(3)}`,
    ...view.warnings,
  ].join("\n");
}

await init();
document.getElementById("sphere-form").addEventListener("submit", runSphere);
document.getElementById("sphere-angle").addEventListener("input", drawSphere);
document.getElementById("sens-form").addEventListener("input", drawSensitivity);
document.getElementById("spd-form").addEventListener("submit", runSpd);
runSphere();
drawSensitivity();
runSpd();

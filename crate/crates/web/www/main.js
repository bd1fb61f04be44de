// Built with `wasm-pack build crates/web --target web --out-dir www/pkg`.
import init, { packet_frames, spectrum_comparison, x_gate_populations } from "./pkg/xyqc_web.js";

const num = (id) => Number(document.getElementById(id).value);

function drawFrames(canvas, data, n, frames) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const peak = Math.max(...data);
  for (let f = 0; f < frames; f++) {
    const shade = Math.round(200 * (1 - f / Math.max(1, frames - 1)));
    ctx.strokeStyle = `rgb(${shade}, ${shade}, 255)`;
    ctx.beginPath();
    for (let x = 0; x < n; x++) {
      const px = (x / (n - 1)) * canvas.width;
      const py = canvas.height - (data[f * n + x] / peak) * (canvas.height - 10);
      x === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
    }
    ctx.stroke();
  }
}

function drawCurve(canvas, ys) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#c33";
  ctx.beginPath();
  ys.forEach((y, i) => {
    const px = (i / (ys.length - 1)) * canvas.width;
    const py = canvas.height - y * (canvas.height - 10) - 5;
    i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
  });
  ctx.stroke();
}

await init();

document.getElementById("pk-run").onclick = () => {
  const n = num("pk-n");
  const frames = 9;
  drawFrames(document.getElementById("pk-canvas"),
    packet_frames(n, num("pk-p0"), num("pk-dx"), num("pk-t"), frames), n, frames);
};

document.getElementById("sp-run").onclick = () => {
  const s = spectrum_comparison(num("sp-n"));
  const lines = ["p   numeric            2cos(2πp/N)"];
  for (let p = 0; p < s.length / 2; p++) {
    lines.push(`${String(p).padEnd(3)} ${s[2 * p].toFixed(14).padStart(18)} ${s[2 * p + 1].toFixed(14).padStart(18)}`);
  }
  document.getElementById("sp-out").textContent = lines.join("\n");
};

document.getElementById("xg-run").onclick = () => {
  drawCurve(document.getElementById("xg-canvas"), x_gate_populations(num("xg-n"), num("xg-phi"), num("xg-t"), 200));
};

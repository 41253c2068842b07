import init, {
  memoryVsStationary,
  thresholdSelection,
  evaluateDocuments,
  galleryDocument,
} from "./pkg/microrl_web.js";

const $ = (id) => document.getElementById(id);
const fmt = (x) => x.toFixed(4);

function drawPlane(result) {
  const c = $("plane");
  const g = c.getContext("2d");
  const pad = 30;
  const size = c.width - 2 * pad;
  const at = ([x, y]) => [pad + x * size, c.height - pad - y * size];
  g.clearRect(0, 0, c.width, c.height);

  g.strokeStyle = "#888";
  g.strokeRect(pad, pad, size, size);
  g.fillStyle = "#444";
  g.font = "12px sans-serif";
  g.fillText("v1", c.width - pad - 10, c.height - 10);
  g.fillText("v2", 6, pad + 4);
  g.fillText("0", pad - 12, c.height - pad + 12);
  g.fillText("1", c.width - pad - 3, c.height - pad + 12);

  // Every stationary policy lands on this segment.
  g.strokeStyle = "#9bd";
  g.lineWidth = 2;
  g.beginPath();
  g.moveTo(...at([0.5, 0]));
  g.lineTo(...at([0, 0.5]));
  g.stroke();

  const dot = (v, color) => {
    const [x, y] = at(v);
    g.fillStyle = color;
    g.beginPath();
    g.arc(x, y, 6, 0, 2 * Math.PI);
    g.fill();
  };
  dot(result.memory, "#c33");
  dot(result.stationary, "#36c");
}

function updateMemory() {
  const p = Number($("p").value);
  $("p-out").textContent = p.toFixed(2);
  const r = JSON.parse(memoryVsStationary(p));
  drawPlane(r);
  $("memory-out").innerHTML =
    `stationary (${r.stationary.map(fmt).join(", ")})<br>` +
    `memory (${r.memory.map(fmt).join(", ")})<br>` +
    `memory strictly better: ${r.memory_strictly_dominates}`;
}

function updateThreshold() {
  const eps = Number($("eps").value);
  $("eps-out").textContent = eps.toFixed(3);
  const r = JSON.parse(thresholdSelection(eps));
  const rows = r.plans.map((p) =>
    `<tr class="${p.maximal ? "maximal" : ""}"><td>${p.plan}</td>` +
    `<td>${fmt(p.values[3])}</td><td>${p.expected_return.toFixed(2)}</td>` +
    `<td>${p.maximal ? "selected" : ""}</td></tr>`);
  $("plans").innerHTML =
    "<tr><th>plan</th><th>P(lose 20)</th><th>expected return</th><th></th></tr>" + rows.join("");
}

function loadExample() {
  $("task").value = galleryDocument($("example").value);
  $("result").innerHTML = "";
}

function evaluate() {
  const out = $("result");
  try {
    const r = JSON.parse(evaluateDocuments($("task").value, $("policy").value, $("mode").value));
    const rows = r.objectives.map((o) => `<tr><td>${o.name}</td><td>${fmt(o.value)}</td></tr>`);
    out.className = "";
    out.innerHTML = `<p>policy <code>${r.policy}</code>, mode ${r.mode}</p>` +
      `<table><tr><th>objective</th><th>value</th></tr>${rows.join("")}</table>`;
  } catch (e) {
    out.className = "error";
    out.textContent = String(e);
  }
}

await init();
$("p").addEventListener("input", updateMemory);
$("eps").addEventListener("input", updateThreshold);
$("example").addEventListener("change", loadExample);
$("run").addEventListener("click", evaluate);
updateMemory();
updateThreshold();
loadExample();
evaluate();

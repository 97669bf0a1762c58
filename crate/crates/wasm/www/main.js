import init, { sample_subgraph, leverage_heatmap, syncrank_recovery } from "../pkg/maglap_wasm.js";

const $ = (id) => document.getElementById(id);

// Tab switching
for (const btn of document.querySelectorAll("nav button")) {
  btn.addEventListener("click", () => {
    document.querySelectorAll("nav button").forEach((b) => b.classList.remove("active"));
    document.querySelectorAll("section").forEach((s) => s.classList.remove("active"));
    btn.classList.add("active");
    $(btn.dataset.tab).classList.add("active");
  });
}

// Slider value labels
const bindLabel = (id) => {
  const el = $(id), label = $(id + "-v");
  if (!label) return;
  const show = () => (label.textContent = el.value);
  el.addEventListener("input", show);
  show();
};
["s-n", "s-p", "s-eta", "s-q", "l-n", "l-p", "l-eta", "l-q", "r-n", "r-p", "r-eta"].forEach(bindLabel);

const X = (c, w, x) => 0.0 + x * w;
const Y = (c, h, y) => 0.0 + y * h;

function drawGraph(ctx, w, h, scene, edgeStyle) {
  ctx.clearRect(0, 0, w, h);
  const { nodes, edges } = scene.graph;
  ctx.lineCap = "round";
  // Base graph in light gray.
  ctx.strokeStyle = "rgba(120,120,120,0.25)";
  ctx.lineWidth = 1;
  for (const [u, v] of edges) {
    ctx.beginPath();
    ctx.moveTo(X(ctx, w, nodes[u][0]), Y(ctx, h, nodes[u][1]));
    ctx.lineTo(X(ctx, w, nodes[v][0]), Y(ctx, h, nodes[v][1]));
    ctx.stroke();
  }
  // Highlighted edges.
  for (let i = 0; i < edges.length; i++) {
    const style = edgeStyle(i);
    if (!style) continue;
    const [u, v] = edges[i];
    ctx.strokeStyle = style.color;
    ctx.lineWidth = style.width;
    ctx.beginPath();
    ctx.moveTo(X(ctx, w, nodes[u][0]), Y(ctx, h, nodes[u][1]));
    ctx.lineTo(X(ctx, w, nodes[v][0]), Y(ctx, h, nodes[v][1]));
    ctx.stroke();
  }
  // Nodes.
  ctx.fillStyle = "rgba(60,60,60,0.8)";
  const r = nodes.length > 200 ? 1.6 : 2.6;
  for (const [x, y] of nodes) {
    ctx.beginPath();
    ctx.arc(X(ctx, w, x), Y(ctx, h, y), r, 0, Math.PI * 2);
    ctx.fill();
  }
}

function drawRoots(ctx, w, h, scene) {
  ctx.fillStyle = "#1a6fb8";
  for (const v of scene.roots) {
    const [x, y] = scene.graph.nodes[v];
    ctx.fillRect(X(ctx, w, x) - 4, Y(ctx, h, y) - 4, 8, 8);
  }
}

// Simple blue→yellow→red ramp for scores in [0, 1].
function ramp(t) {
  const clamp = (v) => Math.max(0, Math.min(1, v));
  const r = clamp(1.8 * t);
  const g = clamp(1.6 * (1 - Math.abs(t - 0.55)));
  const b = clamp(1.4 * (1 - t));
  return `rgb(${(r * 255) | 0},${(g * 255) | 0},${(b * 255) | 0})`;
}

function runSample() {
  const canvas = $("s-canvas"), ctx = canvas.getContext("2d"), stats = $("s-stats");
  try {
    const scene = JSON.parse(
      sample_subgraph(
        $("s-family").value,
        +$("s-n").value,
        +$("s-p").value,
        +$("s-eta").value,
        +$("s-q").value,
        $("s-mode").value === "wilson",
        BigInt($("s-seed").value || "0"),
        BigInt(runSample.replicate++),
      ),
    );
    const sampled = new Set(scene.sampled_edges);
    const cyc = new Set(scene.cycle_edges);
    drawGraph(ctx, canvas.width, canvas.height, scene, (e) =>
      cyc.has(e)
        ? { color: "#c0392b", width: 4 }
        : sampled.has(e)
          ? { color: "#2c7f3f", width: 2.2 }
          : null,
    );
    drawRoots(ctx, canvas.width, canvas.height, scene);
    stats.classList.remove("err");
    stats.textContent =
      `edges kept ${scene.sampled_edges.length}  trees ${scene.tree_count}  cycles ${scene.cycle_count}\n` +
      `walk steps ${scene.steps}  cycles popped ${scene.cycles_popped}  importance weight ${scene.importance_weight.toFixed(3)}`;
  } catch (e) {
    stats.classList.add("err");
    stats.textContent = String(e);
  }
}
runSample.replicate = 0;

function runLeverage() {
  const canvas = $("l-canvas"), ctx = canvas.getContext("2d"), stats = $("l-stats");
  try {
    const scene = JSON.parse(
      leverage_heatmap(
        $("l-family").value,
        +$("l-n").value,
        +$("l-p").value,
        +$("l-eta").value,
        +$("l-q").value,
        BigInt($("l-seed").value || "0"),
      ),
    );
    const max = Math.max(...scene.scores, 1e-12);
    drawGraph(ctx, canvas.width, canvas.height, scene, (e) => ({
      color: ramp(scene.scores[e] / max),
      width: 1.2 + 3.5 * (scene.scores[e] / max),
    }));
    stats.classList.remove("err");
    stats.textContent =
      `expected sample size d_eff ${scene.d_eff.toFixed(2)}   kappa ${scene.kappa.toFixed(4)}\n` +
      `batch size for a (1±0.5)-approximation at 90% confidence: ${scene.suggested_batch}\n` +
      `edge color/width ∝ leverage score (max ${max.toFixed(3)})`;
  } catch (e) {
    stats.classList.add("err");
    stats.textContent = String(e);
  }
}

function runRank() {
  const canvas = $("r-canvas"), ctx = canvas.getContext("2d"), stats = $("r-stats");
  try {
    const scene = JSON.parse(
      syncrank_recovery(+$("r-n").value, +$("r-p").value, +$("r-eta").value, BigInt($("r-seed").value || "0")),
    );
    const w = canvas.width, h = canvas.height, n = scene.planted.length;
    ctx.clearRect(0, 0, w, h);
    ctx.strokeStyle = "rgba(120,120,120,0.5)";
    ctx.strokeRect(40, 40, w - 80, h - 80);
    ctx.beginPath();
    ctx.moveTo(40, h - 40);
    ctx.lineTo(w - 40, 40);
    ctx.stroke();
    ctx.fillStyle = "#1a6fb8";
    for (let u = 0; u < n; u++) {
      const x = 40 + ((scene.planted[u] - 1) / (n - 1)) * (w - 80);
      const y = h - 40 - ((scene.recovered[u] - 1) / (n - 1)) * (h - 80);
      ctx.beginPath();
      ctx.arc(x, y, 3, 0, Math.PI * 2);
      ctx.fill();
    }
    ctx.fillStyle = "currentColor";
    ctx.fillText("planted rank →", w / 2 - 30, h - 16);
    ctx.save();
    ctx.translate(16, h / 2 + 40);
    ctx.rotate(-Math.PI / 2);
    ctx.fillText("recovered rank →", 0, 0);
    ctx.restore();
    stats.classList.remove("err");
    stats.textContent =
      `Kendall tau ${scene.tau.toFixed(4)}   upsets ${scene.upsets}   circular shift ${scene.shift}\n` +
      `${scene.edge_count} comparisons among ${n} items`;
  } catch (e) {
    stats.classList.add("err");
    stats.textContent = String(e);
  }
}

await init();
$("s-go").addEventListener("click", runSample);
$("l-go").addEventListener("click", runLeverage);
$("r-go").addEventListener("click", runRank);
runSample();
runLeverage();
runRank();

import init, { relevance_topomap, pareto_explorer, ittrd_demo } from "./pkg/chansel_wasm.js";

const NS = "http://www.w3.org/2000/svg";
const $ = (id) => document.getElementById(id);

function el(tag, attrs = {}, text) {
  const e = document.createElementNS(NS, tag);
  for (const [k, v] of Object.entries(attrs)) e.setAttribute(k, v);
  if (text !== undefined) e.textContent = text;
  return e;
}

function clear(svg) {
  while (svg.firstChild) svg.removeChild(svg.firstChild);
}

// white -> orange -> dark red for t in [0, 1]
function heat(t) {
  t = Math.max(0, Math.min(1, t));
  const r = Math.round(255 - 80 * Math.max(0, t - 0.5) * 2);
  const g = Math.round(255 - 215 * t);
  const b = Math.round(255 - 255 * Math.min(1, t * 1.6));
  return `rgb(${r},${g},${b})`;
}

// blue for negative, red for positive, scaled by `span`
function diverging(v, span) {
  const t = Math.max(-1, Math.min(1, v / span));
  const c = Math.round(255 * (1 - Math.abs(t)));
  return t < 0 ? `rgb(${c},${c},255)` : `rgb(255,${c},${c})`;
}

function status(id, msg, isError = false) {
  const s = $(id);
  s.textContent = msg;
  s.className = isError ? "status error" : "status";
}

function call(statusId, f) {
  try {
    return f();
  } catch (e) {
    status(statusId, String(e.message ?? e), true);
    return null;
  }
}

// Electrodes on a head outline; `fill(e)` colours each one, `label` toggles names.
function headMap(svg, electrodes, fill, { label = true, stroke = () => "#555", onClick } = {}) {
  clear(svg);
  const w = +svg.getAttribute("width");
  const c = w / 2;
  const r = w * 0.38;
  svg.appendChild(el("circle", { cx: c, cy: c, r, fill: "none", stroke: "#999" }));
  svg.appendChild(el("path", { d: `M ${c - 10} ${c - r} L ${c} ${c - r - 14} L ${c + 10} ${c - r}`, fill: "none", stroke: "#999" }));
  const dot = Math.max(5, w / 40);
  for (const e of electrodes) {
    const x = c + e.x * r;
    const y = c - e.y * r;
    const circle = el("circle", { cx: x, cy: y, r: dot, fill: fill(e), stroke: stroke(e), "stroke-width": e.is_ref ? 2.5 : 1 });
    circle.appendChild(el("title", {}, e.name));
    if (onClick) circle.addEventListener("click", () => onClick(e));
    svg.appendChild(circle);
    if (label) svg.appendChild(el("text", { x, y: y - dot - 2, "text-anchor": "middle" }, e.name));
  }
}

function axes(svg, box, xr, yr, xlabel, ylabel) {
  const { x0, y0, x1, y1 } = box;
  svg.appendChild(el("line", { x1: x0, y1: y1, x2: x1, y2: y1, stroke: "#444" }));
  svg.appendChild(el("line", { x1: x0, y1: y0, x2: x0, y2: y1, stroke: "#444" }));
  svg.appendChild(el("text", { x: (x0 + x1) / 2, y: y1 + 28, "text-anchor": "middle" }, xlabel));
  svg.appendChild(el("text", { x: 12, y: (y0 + y1) / 2, transform: `rotate(-90 12 ${(y0 + y1) / 2})`, "text-anchor": "middle" }, ylabel));
  const fmt = (v) => (Math.abs(v) >= 100 ? v.toFixed(0) : v.toPrecision(3));
  svg.appendChild(el("text", { x: x0, y: y1 + 14 }, fmt(xr[0])));
  svg.appendChild(el("text", { x: x1, y: y1 + 14, "text-anchor": "end" }, fmt(xr[1])));
  svg.appendChild(el("text", { x: x0 - 4, y: y1, "text-anchor": "end" }, fmt(yr[0])));
  svg.appendChild(el("text", { x: x0 - 4, y: y0 + 8, "text-anchor": "end" }, fmt(yr[1])));
  const sx = (v) => x0 + ((v - xr[0]) / (xr[1] - xr[0] || 1)) * (x1 - x0);
  const sy = (v) => y1 - ((v - yr[0]) / (yr[1] - yr[0] || 1)) * (y1 - y0);
  return { sx, sy };
}

function range(values, pad = 0.05) {
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  const p = (hi - lo || Math.abs(hi) || 1) * pad;
  return [lo - p, hi + p];
}

function drawTopomap() {
  const montage = $("topo-montage").value;
  const sigma = +$("topo-sigma").value;
  $("topo-sigma-value").textContent = sigma.toFixed(2);
  const out = call("topo-status", () => JSON.parse(relevance_topomap(montage, sigma)));
  if (!out) return;
  headMap($("topo-map"), out.electrodes, (e) => heat(e.relevance), { label: out.electrodes.length <= 64 });
  status("topo-status", `${out.electrodes.length} electrodes, references ${out.refs.join(", ")}`);
}

function showSubset(out, point) {
  const chosen = new Set(point.channels);
  const dMax = Math.max(...out.channels.map((c) => c.d)) || 1;
  headMap($("par-head"), out.channels, (c) => (chosen.has(c.name) ? heat(0.3 + 0.7 * c.d / dMax) : "#fff"), {
    label: false,
    stroke: (c) => (chosen.has(c.name) ? "#000" : "#bbb"),
  });
  $("subset").textContent =
    `rank ${point.rank}, f1 ${point.f1.toFixed(3)}, f2 ${point.f2.toFixed(2)}, ` +
    `${point.channels.length} channels: ${point.channels.join(" ")}`;
}

function runPareto() {
  const options = {
    algorithm: $("par-alg").value,
    max_channels: +$("par-l").value,
    generations: +$("par-g").value,
    erd_depth: +$("par-erd").value,
    seed: +$("par-seed").value,
    normalize: $("par-norm").checked,
  };
  status("par-status", "running...");
  // let the status line paint before the synchronous call
  setTimeout(() => {
    const t0 = performance.now();
    const out = call("par-status", () => JSON.parse(pareto_explorer(JSON.stringify(options))));
    if (!out) return;
    const svg = $("par-plot");
    clear(svg);
    const pts = out.points;
    const { sx, sy } = axes(
      svg,
      { x0: 60, y0: 12, x1: 448, y1: 340 },
      range(pts.map((p) => p.f1)),
      range(pts.map((p) => p.f2)),
      "f1 = -sum spatial relevance",
      "f2 = -sum desynchronisation",
    );
    const front = pts.filter((p) => p.rank === 0).sort((a, b) => a.f1 - b.f1);
    if (front.length > 1) {
      const d = front.map((p, i) => `${i ? "L" : "M"} ${sx(p.f1)} ${sy(p.f2)}`).join(" ");
      svg.appendChild(el("path", { d, fill: "none", stroke: "#c33", "stroke-dasharray": "4 3" }));
    }
    for (const p of pts) {
      const c = el("circle", {
        class: "point",
        cx: sx(p.f1),
        cy: sy(p.f2),
        r: p.candidate ? 6 : 4,
        fill: p.rank === 0 ? "#c33" : "#89a",
        stroke: p.candidate ? "#000" : "none",
      });
      c.appendChild(el("title", {}, `rank ${p.rank}: ${p.channels.join(" ")}`));
      c.addEventListener("click", () => showSubset(out, p));
      svg.appendChild(c);
    }
    showSubset(out, front[0] ?? pts[0]);
    const ms = (performance.now() - t0).toFixed(0);
    status(
      "par-status",
      `${pts.length} distinct solutions, ${front.length} non-dominated, hypervolume ${out.hypervolume.toFixed(2)} ` +
        `(reference at the origin), ${ms} ms. Click a point to see its channels.`,
    );
  }, 10);
}

function runIttrd() {
  const options = {
    channel: $("it-ch").value.trim(),
    erd_depth: +$("it-erd").value,
    snr: +$("it-snr").value,
    seed: +$("it-seed").value,
  };
  status("it-status", "running...");
  setTimeout(() => {
    const out = call("it-status", () => JSON.parse(ittrd_demo(JSON.stringify(options))));
    if (!out) return;
    const colors = ["#2a6fdb", "#d9480f"];

    const psd = $("it-psd");
    clear(psd);
    const keep = out.freqs.map((f, i) => [f, i]).filter(([f]) => f > 0 && f <= 40);
    const curves = out.classes.flatMap((c) => [c.baseline, c.activation]);
    const logs = curves.flatMap((v) => keep.map(([, i]) => Math.log10(v[i])));
    const { sx, sy } = axes(psd, { x0: 50, y0: 12, x1: 408, y1: 260 }, range(keep.map(([f]) => f), 0), range(logs), "Hz", "log10 PSD");
    const [lo, hi] = out.band;
    psd.appendChild(el("rect", { x: sx(lo), y: 12, width: sx(hi) - sx(lo), height: 248, fill: "#eee" }));
    out.classes.forEach((c, k) => {
      for (const [v, dash] of [[c.baseline, ""], [c.activation, "5 3"]]) {
        const d = keep.map(([f, i], j) => `${j ? "L" : "M"} ${sx(f)} ${sy(Math.log10(v[i]))}`).join(" ");
        psd.appendChild(el("path", { d, fill: "none", stroke: colors[k], "stroke-dasharray": dash }));
      }
    });
    psd.appendChild(el("text", { x: 300, y: 24 }, "solid: baseline"));
    psd.appendChild(el("text", { x: 300, y: 38 }, "dashed: activation"));

    const strip = $("it-strip");
    clear(strip);
    const vals = out.trials.map((t) => t.ittrd);
    const yr = range(vals.concat([0]));
    const ax = axes(strip, { x0: 50, y0: 12, x1: 210, y1: 260 }, [0, 2], yr, "class", "ITTRD %");
    strip.appendChild(el("line", { x1: 50, x2: 210, y1: ax.sy(0), y2: ax.sy(0), stroke: "#aaa" }));
    out.trials.forEach((t, i) => {
      const jitter = ((i * 37) % 17) / 17 - 0.5;
      strip.appendChild(el("circle", { cx: ax.sx(t.label + 0.5 + 0.4 * jitter), cy: ax.sy(t.ittrd), r: 3, fill: colors[t.label], opacity: 0.7 }));
    });
    out.classes.forEach((c, k) => {
      strip.appendChild(el("line", { x1: ax.sx(k + 0.2), x2: ax.sx(k + 0.8), y1: ax.sy(c.mean_ittrd), y2: ax.sy(c.mean_ittrd), stroke: "#000", "stroke-width": 2 }));
    });

    headMap($("it-map"), out.channels, (c) => diverging(c.mean_ittrd_class1, 60), {
      label: false,
      stroke: (c) => (c.name === out.channel ? "#000" : "#bbb"),
    });
    const means = out.classes.map((c) => c.mean_ittrd.toFixed(1));
    status(
      "it-status",
      `${out.channel}: mean ITTRD ${means[0]}% for class 0 (blue), ${means[1]}% for class 1 (orange). ` +
        `Map: class-1 mean ITTRD per channel, blue = desynchronisation.`,
    );
  }, 10);
}

await init();
$("topo-montage").addEventListener("change", drawTopomap);
$("topo-sigma").addEventListener("input", drawTopomap);
$("par-run").addEventListener("click", runPareto);
$("it-run").addEventListener("click", runIttrd);
drawTopomap();
runPareto();
runIttrd();

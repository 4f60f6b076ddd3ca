import { ConsoleSession } from './console.js';
import type { Point } from './buffer.js';
import { formatValue } from './units.js';

const session = new ConsoleSession(window.location.origin);
const store = session.store;

const app = document.querySelector<HTMLDivElement>('#app')!;
app.innerHTML = `
  <header class="topbar">
    <h1>minewatch console</h1>
    <span id="conn" class="pill">connecting…</span>
    <nav id="clusters" class="clusters"></nav>
  </header>
  <main class="columns">
    <section id="charts" class="charts"></section>
    <aside class="alarms">
      <h2>Alarms</h2>
      <div id="alarm-list"></div>
    </aside>
  </main>
`;

const connEl = document.querySelector<HTMLSpanElement>('#conn')!;
const clustersEl = document.querySelector<HTMLElement>('#clusters')!;
const chartsEl = document.querySelector<HTMLElement>('#charts')!;
const alarmsEl = document.querySelector<HTMLElement>('#alarm-list')!;

function drawSeries(canvas: HTMLCanvasElement, points: readonly Point[]) {
  const ctx = canvas.getContext('2d')!;
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  if (points.length === 0) return;
  const ts = points.map((p) => p.t);
  const vs = points.map((p) => p.value);
  const t0 = ts[0];
  const tSpan = Math.max(ts[ts.length - 1] - t0, 1);
  const vMin = Math.min(...vs);
  const vSpan = Math.max(Math.max(...vs) - vMin, 1e-9);
  const x = (t: number) => 4 + ((t - t0) / tSpan) * (w - 8);
  const y = (v: number) => h - 4 - ((v - vMin) / vSpan) * (h - 8);

  ctx.strokeStyle = '#58a6ff';
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  points.forEach((p, i) =>
    i === 0 ? ctx.moveTo(x(p.t), y(p.value)) : ctx.lineTo(x(p.t), y(p.value)));
  ctx.stroke();

  ctx.fillStyle = '#f0883e'; // on-demand poll results stand out
  for (const p of points) {
    if (!p.marked) continue;
    ctx.beginPath();
    ctx.arc(x(p.t), y(p.value), 3.5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function renderClusters() {
  clustersEl.innerHTML = '';
  const all = document.createElement('button');
  all.textContent = 'all clusters';
  all.className = store.selectedCluster === null ? 'active' : '';
  all.onclick = () => session.selectCluster(null);
  clustersEl.append(all);
  for (const c of store.clusters) {
    const btn = document.createElement('button');
    btn.textContent = `cluster ${c.cluster} ${c.live ? '●' : '○'}`;
    btn.className = store.selectedCluster === c.cluster ? 'active' : '';
    btn.title = c.live ? 'head responding' : 'head not responding';
    btn.onclick = () => session.selectCluster(c.cluster);
    clustersEl.append(btn);
  }
}

function renderCharts() {
  chartsEl.innerHTML = '';
  if (store.selectedCluster === null) {
    const table = document.createElement('table');
    table.innerHTML = '<tr><th>node</th><th>kind</th><th>latest</th></tr>';
    for (const [node, byKind] of [...store.latestByNode()].sort(
      (a, b) => a[0] - b[0],
    )) {
      for (const [kind, point] of byKind) {
        const row = table.insertRow();
        row.innerHTML = `<td>${node}</td><td>${kind}</td>` +
          `<td>${formatValue(kind, point.value)}</td>`;
      }
    }
    chartsEl.append(table);
    return;
  }
  for (const [node, byKind] of [...store.visibleSeries()].sort(
    (a, b) => a[0] - b[0],
  )) {
    const card = document.createElement('div');
    card.className = 'chart-card';
    const poll = document.createElement('button');
    poll.textContent = 'poll';
    poll.onclick = () =>
      session.pollNode(node).catch((e) => alert(`poll node ${node}: ${e.message}`));
    const title = document.createElement('h3');
    title.textContent = `node ${node}`;
    title.append(poll);
    card.append(title);
    for (const [kind, points] of byKind) {
      const label = document.createElement('div');
      const last = points[points.length - 1];
      label.className = 'series-label';
      label.textContent = `${kind}: ${formatValue(kind, last.value)}`;
      const canvas = document.createElement('canvas');
      canvas.width = 360;
      canvas.height = 70;
      drawSeries(canvas, points);
      card.append(label, canvas);
    }
    chartsEl.append(card);
  }
}

function renderAlarms() {
  alarmsEl.innerHTML = '';
  for (const alarm of store.alarms().slice().reverse()) {
    const row = document.createElement('div');
    row.className = `alarm ${alarm.state}`;
    row.textContent =
      `#${alarm.id} ${alarm.rule} node ${alarm.node} — ${alarm.state}`;
    if (alarm.state === 'active') {
      const ack = document.createElement('button');
      ack.textContent = 'ack';
      ack.onclick = () =>
        session.ackAlarm(alarm.id).catch((e) => alert(`ack: ${e.message}`));
      row.append(ack);
    } else if (alarm.ack_session) {
      row.textContent += ` (by ${alarm.ack_session} at ${alarm.ack_at})`;
    }
    alarmsEl.append(row);
  }
}

store.subscribe(() => {
  connEl.textContent = store.connected ? 'live' : 'reconnecting…';
  connEl.className = `pill ${store.connected ? 'up' : 'down'}`;
  renderClusters();
  renderCharts();
  renderAlarms();
});

session.connect().catch((e) => {
  connEl.textContent = `failed: ${e.message}`;
});

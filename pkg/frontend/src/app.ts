import { ApiClient } from './api.js';
import { stepPath } from './cdf.js';
import { dashboardModel } from './dashboard.js';
import { drawOverlay, drawTimeline, timelineSegments } from './overlay.js';
import { ReviewQueue } from './queue.js';
import type { CaseSummary, RoiMode } from './types.js';

const PAGE = `
<div class="layout">
  <aside id="queue-panel">
    <h2>Pending referrals</h2>
    <ul id="queue-list"></ul>
  </aside>
  <main id="case-panel">
    <h2 id="case-title">No referral selected</h2>
    <div id="viewer">
      <canvas id="case-canvas" width="384" height="384"></canvas>
      <canvas id="timeline-canvas" width="384" height="28"></canvas>
    </div>
    <div id="controls">
      <label>overlay <input id="opacity" type="range" min="0" max="100" value="55"></label>
      <label><input id="roi-mode" type="checkbox"> pooled heatmap</label>
      <button id="accept-btn" title="shortcut: A">Accept (A)</button>
      <button id="reject-btn" title="shortcut: R">Reject (R)</button>
    </div>
    <pre id="report-text"></pre>
    <div id="notice" hidden></div>
  </main>
  <aside id="metrics-panel">
    <h2>Metrics</h2>
    <div id="metrics-summary">no decisions yet</div>
    <table id="confusion-table"><thead>
      <tr><th>abnormality</th><th>TR</th><th>FD</th><th>PECR</th><th>FR</th><th>TD</th><th>ODER</th></tr>
    </thead><tbody></tbody></table>
    <h3>Referral usefulness CDF</h3>
    <canvas id="cdf-ru" width="300" height="120"></canvas>
    <h3>Total usefulness CDF</h3>
    <canvas id="cdf-tu" width="300" height="120"></canvas>
  </aside>
</div>`;

export class App {
  readonly api: ApiClient;
  readonly queue: ReviewQueue;
  private currentCase: CaseSummary | null = null;
  private baseImage: HTMLImageElement | null = null;
  private roiImage: HTMLImageElement | null = null;

  constructor(private readonly doc: Document, apiBase = '') {
    this.api = new ApiClient(apiBase);
    this.queue = new ReviewQueue(this.api);
  }

  private el<T extends HTMLElement>(id: string): T {
    const found = this.doc.getElementById(id);
    if (!found) throw new Error(`missing element #${id}`);
    return found as T;
  }

  async start(root: HTMLElement): Promise<void> {
    root.innerHTML = PAGE;
    this.el<HTMLButtonElement>('accept-btn').addEventListener('click', () => {
      void this.decide('accept');
    });
    this.el<HTMLButtonElement>('reject-btn').addEventListener('click', () => {
      void this.decide('reject');
    });
    this.el<HTMLInputElement>('opacity').addEventListener('input', () => this.paint());
    this.el<HTMLInputElement>('roi-mode').addEventListener('change', () => {
      void this.loadRoi();
    });
    this.doc.addEventListener('keydown', (ev: KeyboardEvent) => {
      if (ev.key === 'a' || ev.key === 'A') void this.decide('accept');
      if (ev.key === 'r' || ev.key === 'R') void this.decide('reject');
    });
    await this.refreshQueue();
    await this.refreshMetrics();
  }

  async refreshQueue(): Promise<void> {
    await this.queue.refresh();
    this.renderQueue();
    await this.openSelected();
  }

  renderQueue(): void {
    const list = this.el<HTMLUListElement>('queue-list');
    list.innerHTML = '';
    for (const ref of this.queue.items) {
      const item = this.doc.createElement('li');
      item.dataset.referralId = ref.referral_id;
      if (ref.referral_id === this.queue.selected) item.classList.add('selected');

      const thumb = this.doc.createElement('img');
      thumb.src = this.api.roiUrl(ref);
      thumb.width = 40;
      thumb.height = 40;
      const label = this.doc.createElement('span');
      label.textContent = `${ref.case_id} · ${ref.abnormality}`;
      item.append(thumb, label);
      item.addEventListener('click', () => {
        this.queue.select(ref.referral_id);
        this.renderQueue();
        void this.openSelected();
      });
      list.appendChild(item);
    }
  }

  private roiMode(): RoiMode {
    return this.el<HTMLInputElement>('roi-mode').checked ? 'static' : 'mean';
  }

  async openSelected(): Promise<void> {
    const ref = this.queue.current;
    const title = this.el<HTMLHeadingElement>('case-title');
    if (!ref) {
      title.textContent = 'Queue empty';
      this.el<HTMLPreElement>('report-text').textContent = '';
      this.currentCase = null;
      this.paint();
      return;
    }
    title.textContent = `${ref.case_id}: suspected ${ref.abnormality.replace('_', ' ')}`;
    this.currentCase = await this.api.getCase(ref.case_id);
    this.el<HTMLPreElement>('report-text').textContent = this.currentCase.report_text;
    this.baseImage = await this.loadImage(this.api.caseImageUrl(ref.case_id));
    await this.loadRoi();
  }

  async loadRoi(): Promise<void> {
    const ref = this.queue.current;
    this.roiImage = ref ? await this.loadImage(this.api.roiUrl(ref, this.roiMode())) : null;
    this.paint();
  }

  private loadImage(src: string): Promise<HTMLImageElement | null> {
    return new Promise((resolve) => {
      const img = this.doc.createElement('img') as HTMLImageElement;
      // headless DOMs never fire load events; don't stall the review loop
      const fallback = setTimeout(() => resolve(img), 800);
      img.onload = () => {
        clearTimeout(fallback);
        resolve(img);
      };
      img.onerror = () => {
        clearTimeout(fallback);
        resolve(null);
      };
      img.src = src;
    });
  }

  paint(): void {
    const canvas = this.el<HTMLCanvasElement>('case-canvas');
    const opacity = Number(this.el<HTMLInputElement>('opacity').value) / 100;
    if (this.baseImage) {
      drawOverlay(canvas, this.baseImage, this.roiImage, opacity);
    }
    const ref = this.queue.current;
    const timeline = this.el<HTMLCanvasElement>('timeline-canvas');
    if (ref && this.currentCase) {
      const segs = timelineSegments(
        this.currentCase.fixations,
        this.currentCase.total_duration_ms,
        ref.interval,
        timeline.width,
      );
      const sx = (t: number) => (t / this.currentCase!.total_duration_ms) * timeline.width;
      drawTimeline(timeline, segs, {
        x0: sx(ref.interval.t_start_ms),
        x1: sx(ref.interval.t_end_ms),
      });
    } else {
      drawTimeline(timeline, [], null);
    }
  }

  notice(text: string): void {
    const box = this.el<HTMLDivElement>('notice');
    box.textContent = text;
    box.hidden = false;
  }

  async decide(decision: 'accept' | 'reject'): Promise<void> {
    if (!this.queue.current) return;
    const event = await this.queue.decideCurrent(decision);
    if (event.kind === 'conflict') {
      this.notice(`Already decided elsewhere; queue refreshed (${event.message})`);
    } else if (event.kind === 'error') {
      this.notice(`Decision failed: ${event.message}`);
    } else {
      this.notice(event.message);
    }
    this.renderQueue();
    await this.openSelected();
    await this.refreshMetrics();
  }

  async refreshMetrics(): Promise<void> {
    const model = dashboardModel(await this.api.getMetrics());
    const summary = this.el<HTMLDivElement>('metrics-summary');
    summary.textContent = model.hasData
      ? `RU mean ${model.ruMeanText} ${model.ruCiText} (n=${model.ruN}), ` +
        `${model.pending} pending`
      : `no decisions yet, ${model.pending} pending`;

    const tbody = this.el<HTMLTableElement>('confusion-table').querySelector('tbody')!;
    tbody.innerHTML = '';
    for (const row of model.rows) {
      const tr = this.doc.createElement('tr');
      for (const cell of [row.abnormality, row.tr, row.fd, row.pecr, row.fr, row.td, row.oder]) {
        const td = this.doc.createElement('td');
        td.textContent = String(cell);
        tr.appendChild(td);
      }
      tbody.appendChild(tr);
    }
    this.drawCdf('cdf-ru', model.cdfRu);
    this.drawCdf('cdf-tu', model.cdfTu);
  }

  private drawCdf(id: string, points: [number, number][]): void {
    const canvas = this.el<HTMLCanvasElement>(id);
    const ctx = canvas.getContext('2d');
    if (!ctx) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.fillStyle = '#111821';
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    const path = stepPath(points, canvas.width, canvas.height);
    if (path.length === 0) return;
    ctx.strokeStyle = '#4fc3f7';
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(path[0].x, path[0].y);
    for (const p of path.slice(1)) ctx.lineTo(p.x, p.y);
    ctx.stroke();
  }
}

export async function initApp(doc: Document, apiBase = ''): Promise<App> {
  const root = doc.getElementById('app');
  if (!root) throw new Error('missing #app root');
  const app = new App(doc, apiBase);
  await app.start(root);
  return app;
}

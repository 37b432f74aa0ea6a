"use strict";
(() => {
  // src/api.ts
  var ApiError = class extends Error {
    constructor(status, message) {
      super(message);
      this.status = status;
      this.name = "ApiError";
    }
  };
  var AuthError = class extends ApiError {
    constructor() {
      super(401, "authorization required");
      this.name = "AuthError";
    }
  };
  var ApiClient = class {
    constructor(base = "", token = null) {
      this.base = base;
      this.token = token;
    }
    setToken(token) {
      this.token = token;
    }
    async request(path, init) {
      const headers = { Accept: "application/json" };
      if (this.token) {
        headers["Authorization"] = `Bearer ${this.token}`;
      }
      const resp = await fetch(this.base + path, { ...init, headers });
      if (resp.status === 401) {
        throw new AuthError();
      }
      if (!resp.ok) {
        let message = `${resp.status}`;
        try {
          const body = await resp.json();
          if (body.error) message = body.error;
        } catch {
        }
        throw new ApiError(resp.status, message);
      }
      return await resp.json();
    }
    studies() {
      return this.request("/api/studies");
    }
    study(name) {
      return this.request(`/api/studies/${encodeURIComponent(name)}`);
    }
    cases(name) {
      return this.request(`/api/studies/${encodeURIComponent(name)}/cases`);
    }
    secondary(name) {
      return this.request(`/api/studies/${encodeURIComponent(name)}/secondary`);
    }
    events(study, since, timeout) {
      const query = new URLSearchParams({
        study,
        since: String(since),
        timeout: String(timeout)
      });
      return this.request(`/api/events?${query}`);
    }
    cancel(study, caseId) {
      return this.request(
        `/api/studies/${encodeURIComponent(study)}/cases/${encodeURIComponent(caseId)}/cancel`,
        { method: "POST" }
      );
    }
  };

  // src/chart.ts
  function asNumber(cell) {
    if (typeof cell === "number") return Number.isFinite(cell) ? cell : null;
    if (typeof cell === "boolean") return cell ? 1 : 0;
    if (cell === void 0) return null;
    const value = Number(cell);
    return Number.isFinite(value) ? value : null;
  }
  function seriesFor(table, sel) {
    const xi = table.columns.indexOf(sel.x);
    const yi = table.columns.indexOf(sel.y);
    const gi = table.columns.indexOf(sel.group);
    if (xi < 0 || yi < 0 || gi < 0) return [];
    const byGroup = /* @__PURE__ */ new Map();
    for (const row of table.rows) {
      const x = asNumber(row[xi]);
      const y = asNumber(row[yi]);
      if (x === null || y === null) continue;
      const key = String(row[gi]);
      let points = byGroup.get(key);
      if (points === void 0) {
        points = [];
        byGroup.set(key, points);
      }
      points.push([x, y]);
    }
    return [...byGroup.entries()].map(([value, points]) => ({
      label: `${sel.group}=${value}`,
      points
    }));
  }
  var PALETTE = ["#2563eb", "#dc2626", "#059669", "#d97706", "#7c3aed", "#0891b2"];
  var WIDTH = 640;
  var HEIGHT = 360;
  var PAD = 46;
  function esc(text) {
    return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
  }
  function chartSvg(series, xLabel, yLabel) {
    const all = series.flatMap((s) => s.points);
    if (all.length === 0) {
      return `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" class="chart"><text x="20" y="30">no plottable rows</text></svg>`;
    }
    const xs = all.map((p) => p[0]);
    const ys = all.map((p) => p[1]);
    let [x0, x1] = [Math.min(...xs), Math.max(...xs)];
    let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
    if (x0 === x1) [x0, x1] = [x0 - 1, x1 + 1];
    if (y0 === y1) [y0, y1] = [y0 - 1, y1 + 1];
    const sx = (x) => PAD + (x - x0) / (x1 - x0) * (WIDTH - 2 * PAD);
    const sy = (y) => HEIGHT - PAD - (y - y0) / (y1 - y0) * (HEIGHT - 2 * PAD);
    const parts = [
      `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" class="chart" role="img">`,
      `<rect x="${PAD}" y="${PAD}" width="${WIDTH - 2 * PAD}" height="${HEIGHT - 2 * PAD}" class="chart-frame"/>`
    ];
    series.forEach((s, index) => {
      const color = PALETTE[index % PALETTE.length];
      const coords = s.points.map(([x, y]) => `${sx(x).toFixed(2)},${sy(y).toFixed(2)}`).join(" ");
      parts.push(
        `<polyline fill="none" stroke="${color}" stroke-width="2" points="${coords}"/>`
      );
      for (const [x, y] of s.points) {
        parts.push(
          `<circle cx="${sx(x).toFixed(2)}" cy="${sy(y).toFixed(2)}" r="3.5" fill="${color}"/>`
        );
      }
      parts.push(
        `<text x="${WIDTH - PAD}" y="${PAD + 16 * (index + 1)}" text-anchor="end" fill="${color}" class="legend">${esc(s.label)}</text>`
      );
    });
    parts.push(
      `<text x="${WIDTH / 2}" y="${HEIGHT - 10}" text-anchor="middle" class="axis">${esc(xLabel)}</text>`,
      `<text x="14" y="${HEIGHT / 2}" text-anchor="middle" transform="rotate(-90 14 ${HEIGHT / 2})" class="axis">${esc(yLabel)}</text>`,
      `</svg>`
    );
    return parts.join("");
  }

  // src/state.ts
  var CANCELLING = "Cancelling\u2026";
  function initialState() {
    return {
      studies: [],
      selected: null,
      cases: [],
      secondary: null,
      chart: null,
      cursor: 0,
      cancelling: /* @__PURE__ */ new Set(),
      banner: null,
      toast: null
    };
  }
  function applyStudies(state, studies) {
    return { ...state, studies };
  }
  function selectStudy(state, name) {
    if (name === state.selected) return state;
    return {
      ...state,
      selected: name,
      cases: [],
      secondary: null,
      chart: null,
      cursor: 0,
      cancelling: /* @__PURE__ */ new Set()
    };
  }
  var TERMINAL = /* @__PURE__ */ new Set([
    "Succeeded",
    "Failed",
    "Cancelled"
  ]);
  function applyCases(state, cases) {
    const cancelling = new Set(
      [...state.cancelling].filter((id) => {
        const row = cases.find((c) => c.id === id);
        return row !== void 0 && !TERMINAL.has(row.status);
      })
    );
    return { ...state, cases, cancelling };
  }
  function applySecondary(state, secondary) {
    const chart = state.chart && secondary && chartValid(secondary, state.chart) ? state.chart : secondary ? defaultChart(secondary) : null;
    return { ...state, secondary, chart };
  }
  function chartValid(table, sel) {
    return table.columns.includes(sel.x) && table.result_columns.includes(sel.y) && table.metadata_columns.includes(sel.group);
  }
  function defaultChart(table) {
    const numeric = (c) => table.column_types[c] !== "str";
    const results = table.result_columns.filter(numeric);
    const groups = table.metadata_columns;
    if (results.length === 0 || groups.length === 0) return null;
    const y = results[results.length - 1];
    const x = results.find((c) => c !== y) ?? table.columns.find(numeric) ?? y;
    const varied = groups.find((g) => {
      const i = table.columns.indexOf(g);
      return new Set(table.rows.map((r) => r[i])).size > 1;
    });
    return { x, y, group: varied ?? groups[0] };
  }
  function setChart(state, chart) {
    return { ...state, chart };
  }
  function statusFromEvent(kind, detail) {
    switch (kind) {
      case "CaseStarted":
        return "Running";
      case "CaseFinished":
        return detail === "exit 0" ? "Succeeded" : "Failed";
      case "CaseCancelled":
        return "Cancelled";
      default:
        return null;
    }
  }
  function applyEvents(state, batch) {
    const changed = [];
    let finished = false;
    if (batch.study !== state.selected) {
      return { state, changed, finished };
    }
    const byId = new Map(state.cases.map((c) => [c.id, c]));
    const cancelling = new Set(state.cancelling);
    for (const event of batch.events) {
      if (event.kind === "StudyFinished") {
        finished = true;
        continue;
      }
      const status = statusFromEvent(event.kind, event.detail);
      if (status === null || event.case_id === "") continue;
      const row = byId.get(event.case_id);
      if (row === void 0 || row.status === status) continue;
      byId.set(event.case_id, { ...row, status });
      changed.push(event.case_id);
      if (TERMINAL.has(status)) {
        finished = true;
        cancelling.delete(event.case_id);
      }
    }
    const next = {
      ...state,
      cases: changed.length ? state.cases.map((c) => byId.get(c.id) ?? c) : state.cases,
      cancelling,
      cursor: Math.max(state.cursor, batch.latest_seq)
    };
    return { state: next, changed, finished };
  }
  function markCancelling(state, caseId) {
    const cancelling = new Set(state.cancelling);
    cancelling.add(caseId);
    return { ...state, cancelling };
  }
  function displayedStatus(state, row) {
    return state.cancelling.has(row.id) ? CANCELLING : row.status;
  }
  function setBanner(state, banner) {
    return state.banner === banner ? state : { ...state, banner };
  }
  function setToast(state, toast) {
    return { ...state, toast };
  }

  // src/render.ts
  function setText(el, text) {
    if (el.textContent !== text) el.textContent = text;
  }
  function setAttr(el, name, value) {
    if (el.getAttribute(name) !== value) el.setAttribute(name, value);
  }
  function renderBanner(el, state) {
    setText(el, state.banner ?? "");
    el.hidden = state.banner === null;
  }
  function renderToast(el, state) {
    setText(el, state.toast ?? "");
    el.hidden = state.toast === null;
  }
  function renderStudies(list, state, handlers) {
    const existing = /* @__PURE__ */ new Map();
    for (const child of Array.from(list.children)) {
      existing.set(child.dataset["study"] ?? "", child);
    }
    let index = 0;
    for (const study of state.studies) {
      let item = existing.get(study.name);
      if (item === void 0) {
        item = document.createElement("li");
        item.dataset["study"] = study.name;
        const button = document.createElement("button");
        button.type = "button";
        button.className = "study-link";
        button.addEventListener("click", () => handlers.onSelect(study.name));
        const name = document.createElement("span");
        name.className = "study-name";
        const progress = document.createElement("span");
        progress.className = "study-progress";
        button.append(name, progress);
        item.append(button);
      } else {
        existing.delete(study.name);
      }
      const done = study.counts.Succeeded + study.counts.Failed + study.counts.Cancelled;
      setText(item.querySelector(".study-name"), study.name);
      setText(item.querySelector(".study-progress"), `${done}/${study.total}`);
      item.classList.toggle("selected", study.name === state.selected);
      if (list.children[index] !== item) {
        list.insertBefore(item, list.children[index] ?? null);
      }
      index += 1;
    }
    for (const stale of existing.values()) stale.remove();
  }
  function paramsText(row) {
    return Object.entries(row.params).map(([k, v]) => `${k}=${String(v)}`).join("  ");
  }
  function renderCases(tbody, state, handlers) {
    const existing = /* @__PURE__ */ new Map();
    for (const child of Array.from(tbody.children)) {
      existing.set(
        child.dataset["caseId"] ?? "",
        child
      );
    }
    let index = 0;
    for (const row of state.cases) {
      let tr = existing.get(row.id);
      if (tr === void 0) {
        tr = document.createElement("tr");
        tr.dataset["caseId"] = row.id;
        const id = document.createElement("td");
        id.className = "case-id";
        const badgeCell = document.createElement("td");
        const badge2 = document.createElement("span");
        badge2.className = "badge";
        badgeCell.append(badge2);
        const params = document.createElement("td");
        params.className = "case-params";
        const actions = document.createElement("td");
        const cancel2 = document.createElement("button");
        cancel2.type = "button";
        cancel2.className = "cancel";
        cancel2.textContent = "cancel";
        cancel2.addEventListener("click", () => handlers.onCancel(row.id));
        actions.append(cancel2);
        tr.append(id, badgeCell, params, actions);
      } else {
        existing.delete(row.id);
      }
      setText(tr.querySelector(".case-id"), row.id);
      setText(tr.querySelector(".case-params"), paramsText(row));
      const badge = tr.querySelector(".badge");
      const shown = displayedStatus(state, row);
      setText(badge, shown);
      setAttr(badge, "data-status", shown);
      const cancel = tr.querySelector(".cancel");
      const cancellable = row.status === "Pending" || row.status === "Running";
      const pending = state.cancelling.has(row.id);
      cancel.hidden = !cancellable;
      cancel.disabled = pending;
      if (tbody.children[index] !== tr) {
        tbody.insertBefore(tr, tbody.children[index] ?? null);
      }
      index += 1;
    }
    for (const stale of existing.values()) stale.remove();
  }
  function fillSelect(select, options, value) {
    const current = Array.from(select.options).map((o) => o.value);
    if (current.join("\0") !== options.join("\0")) {
      select.textContent = "";
      for (const column of options) {
        const option = document.createElement("option");
        option.value = column;
        option.textContent = column;
        select.append(option);
      }
    }
    if (select.value !== value) select.value = value;
  }
  function renderChartControls(container, state, handlers) {
    const table = state.secondary;
    container.hidden = table === null || state.chart === null;
    if (table === null || state.chart === null) return;
    const numeric = table.columns.filter(
      (c) => c !== "ID" && table.column_types[c] !== "str"
    );
    const selects = {
      x: container.querySelector('select[data-part="x"]'),
      y: container.querySelector('select[data-part="y"]'),
      group: container.querySelector('select[data-part="group"]')
    };
    fillSelect(selects.x, numeric, state.chart.x);
    fillSelect(
      selects.y,
      table.result_columns.filter((c) => table.column_types[c] !== "str"),
      state.chart.y
    );
    fillSelect(selects.group, table.metadata_columns, state.chart.group);
    for (const part of ["x", "y", "group"]) {
      selects[part].onchange = () => handlers.onChart(part, selects[part].value);
    }
  }
  function renderChart(el, state) {
    if (state.secondary === null || state.chart === null) {
      const note = '<p class="note">no secondary data yet</p>';
      if (el.innerHTML !== note) el.innerHTML = note;
      return;
    }
    const svg = chartSvg(
      seriesFor(state.secondary, state.chart),
      state.chart.x,
      state.chart.y
    );
    if (el.dataset["svg"] !== svg) {
      el.innerHTML = svg;
      el.dataset["svg"] = svg;
    }
  }
  function renderTitle(el, state) {
    setText(el, state.selected ?? "no study selected");
  }
  function renderAll(elements, state, handlers) {
    renderBanner(elements.banner, state);
    renderToast(elements.toast, state);
    renderStudies(elements.studies, state, handlers);
    renderTitle(elements.title, state);
    renderCases(elements.cases, state, handlers);
    renderChartControls(elements.chartControls, state, handlers);
    renderChart(elements.chart, state);
  }

  // src/main.ts
  var TOKEN_KEY = "labrun_token";
  var POLL_SECONDS = 20;
  var BACKOFF_START_MS = 500;
  var BACKOFF_CAP_MS = 8e3;
  function sleep(ms) {
    return new Promise((resolve) => setTimeout(resolve, ms));
  }
  var Dashboard = class {
    constructor(client, elements) {
      this.client = client;
      this.elements = elements;
      this.state = initialState();
      this.running = false;
      this.toastTimer = null;
      this.tokenWaiter = null;
      this.handlers = {
        onSelect: (study) => void this.select(study),
        onCancel: (caseId) => void this.cancel(caseId),
        onChart: (part, column) => {
          if (this.state.chart === null) return;
          this.state = setChart(this.state, { ...this.state.chart, [part]: column });
          this.render();
        }
      };
      this.elements.tokenForm.addEventListener("submit", (event) => {
        event.preventDefault();
        const token = this.elements.tokenInput.value.trim();
        if (!token) return;
        this.client.setToken(token);
        try {
          localStorage.setItem(TOKEN_KEY, token);
        } catch {
        }
        this.elements.tokenForm.hidden = true;
        this.tokenWaiter?.();
        this.tokenWaiter = null;
      });
    }
    render() {
      renderAll(this.elements, this.state, this.handlers);
    }
    toast(message) {
      this.state = setToast(this.state, message);
      this.render();
      if (this.toastTimer) clearTimeout(this.toastTimer);
      this.toastTimer = setTimeout(() => {
        this.state = setToast(this.state, null);
        this.render();
      }, 4e3);
    }
    /** Ask for a token and resolve once the user submitted one. */
    requireToken() {
      this.elements.tokenForm.hidden = false;
      this.elements.tokenInput.focus();
      return new Promise((resolve) => {
        this.tokenWaiter = resolve;
      });
    }
    async refreshStudies() {
      const studies = await this.client.studies();
      this.state = applyStudies(this.state, studies);
      if (this.state.selected === null && studies.length > 0) {
        await this.select(studies[0].name);
        return;
      }
      this.render();
    }
    async select(study) {
      this.state = selectStudy(this.state, study);
      this.render();
      const payload = await this.client.cases(study);
      if (this.state.selected !== study) return;
      this.state = applyCases(this.state, payload.cases);
      await this.refreshSecondary(study);
      this.render();
    }
    async refreshSecondary(study) {
      try {
        const table = await this.client.secondary(study);
        if (this.state.selected !== study) return;
        this.state = applySecondary(this.state, table);
      } catch (error) {
        if (error instanceof ApiError && error.status === 404) {
          this.state = applySecondary(this.state, null);
          return;
        }
        throw error;
      }
    }
    async cancel(caseId) {
      const study = this.state.selected;
      if (study === null) return;
      this.state = markCancelling(this.state, caseId);
      this.render();
      try {
        await this.client.cancel(study, caseId);
      } catch (error) {
        if (error instanceof ApiError && error.status === 409) {
          this.toast(`case ${caseId} already finished`);
          const payload = await this.client.cases(study);
          if (this.state.selected === study) {
            this.state = applyCases(this.state, payload.cases);
            this.render();
          }
          return;
        }
        throw error;
      }
    }
    /** One poll step: long-poll events, fold them in, refresh what changed. */
    async pollOnce(timeout = POLL_SECONDS) {
      const study = this.state.selected;
      if (study === null) {
        await this.refreshStudies();
        return;
      }
      const batch = await this.client.events(study, this.state.cursor, timeout);
      if (this.state.selected !== study) return;
      const outcome = applyEvents(this.state, batch);
      this.state = outcome.state;
      if (batch.events.length > 0) {
        this.state = applyStudies(this.state, await this.client.studies());
      }
      if (outcome.finished) {
        await this.refreshSecondary(study);
      }
      this.state = setBanner(this.state, null);
      this.render();
    }
    async run() {
      this.running = true;
      let backoff = BACKOFF_START_MS;
      while (this.running) {
        try {
          await this.pollOnce();
          backoff = BACKOFF_START_MS;
        } catch (error) {
          if (error instanceof AuthError) {
            await this.requireToken();
            continue;
          }
          const reason = error instanceof Error ? error.message : String(error);
          this.state = setBanner(this.state, `API unreachable, retrying (${reason})`);
          this.render();
          await sleep(backoff);
          backoff = Math.min(backoff * 2, BACKOFF_CAP_MS);
        }
      }
    }
    stop() {
      this.running = false;
    }
  };
  function boot(doc = document) {
    let token = null;
    try {
      token = localStorage.getItem(TOKEN_KEY);
    } catch {
      token = null;
    }
    const client = new ApiClient("", token);
    const byId = (id) => doc.getElementById(id);
    const dashboard = new Dashboard(client, {
      banner: byId("banner"),
      toast: byId("toast"),
      studies: byId("studies"),
      title: byId("study-title"),
      cases: byId("cases"),
      chartControls: byId("chart-controls"),
      chart: byId("chart"),
      tokenForm: byId("token-form"),
      tokenInput: byId("token-input")
    });
    void dashboard.run();
    return dashboard;
  }
  if (typeof document !== "undefined" && document.getElementById("studies")) {
    window.__labrunDashboard = boot();
  }
})();

// Boot, poll, render. One rendering path, at most one in-flight event
// poll, and every state change funnels through src/state.ts.

import { ApiClient, ApiError, AuthError } from "./api.js";
import { renderAll, type Handlers } from "./render.js";
import {
  applyCases,
  applyEvents,
  applySecondary,
  applyStudies,
  initialState,
  markCancelling,
  selectStudy,
  setBanner,
  setChart,
  setToast,
  type ViewState,
} from "./state.js";

const TOKEN_KEY = "labrun_token";
const POLL_SECONDS = 20;
const BACKOFF_START_MS = 500;
const BACKOFF_CAP_MS = 8000;

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class Dashboard {
  state: ViewState = initialState();
  private running = false;
  private toastTimer: ReturnType<typeof setTimeout> | null = null;
  private tokenWaiter: (() => void) | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly elements: {
      banner: HTMLElement;
      toast: HTMLElement;
      studies: HTMLElement;
      title: HTMLElement;
      cases: HTMLElement;
      chartControls: HTMLElement;
      chart: HTMLElement;
      tokenForm: HTMLFormElement;
      tokenInput: HTMLInputElement;
    },
  ) {
    this.elements.tokenForm.addEventListener("submit", (event) => {
      event.preventDefault();
      const token = this.elements.tokenInput.value.trim();
      if (!token) return;
      this.client.setToken(token);
      try {
        localStorage.setItem(TOKEN_KEY, token);
      } catch {
        // storage may be unavailable; the session still works
      }
      this.elements.tokenForm.hidden = true;
      this.tokenWaiter?.();
      this.tokenWaiter = null;
    });
  }

  private readonly handlers: Handlers = {
    onSelect: (study) => void this.select(study),
    onCancel: (caseId) => void this.cancel(caseId),
    onChart: (part, column) => {
      if (this.state.chart === null) return;
      this.state = setChart(this.state, { ...this.state.chart, [part]: column });
      this.render();
    },
  };

  render(): void {
    renderAll(this.elements, this.state, this.handlers);
  }

  private toast(message: string): void {
    this.state = setToast(this.state, message);
    this.render();
    if (this.toastTimer) clearTimeout(this.toastTimer);
    this.toastTimer = setTimeout(() => {
      this.state = setToast(this.state, null);
      this.render();
    }, 4000);
  }

  /** Ask for a token and resolve once the user submitted one. */
  private requireToken(): Promise<void> {
    this.elements.tokenForm.hidden = false;
    this.elements.tokenInput.focus();
    return new Promise((resolve) => {
      this.tokenWaiter = resolve;
    });
  }

  async refreshStudies(): Promise<void> {
    const studies = await this.client.studies();
    this.state = applyStudies(this.state, studies);
    if (this.state.selected === null && studies.length > 0) {
      await this.select(studies[0]!.name);
      return;
    }
    this.render();
  }

  async select(study: string): Promise<void> {
    this.state = selectStudy(this.state, study);
    this.render();
    const payload = await this.client.cases(study);
    if (this.state.selected !== study) return; // switched away meanwhile
    this.state = applyCases(this.state, payload.cases);
    await this.refreshSecondary(study);
    this.render();
  }

  private async refreshSecondary(study: string): Promise<void> {
    try {
      const table = await this.client.secondary(study);
      if (this.state.selected !== study) return;
      this.state = applySecondary(this.state, table);
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        this.state = applySecondary(this.state, null); // not collected yet
        return;
      }
      throw error;
    }
  }

  async cancel(caseId: string): Promise<void> {
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
  async pollOnce(timeout: number = POLL_SECONDS): Promise<void> {
    const study = this.state.selected;
    if (study === null) {
      await this.refreshStudies();
      return;
    }
    const batch = await this.client.events(study, this.state.cursor, timeout);
    if (this.state.selected !== study) return; // stale response for another study
    const outcome = applyEvents(this.state, batch);
    this.state = outcome.state;
    if (batch.events.length > 0) {
      // counts shown in the sidebar must match the server snapshot
      this.state = applyStudies(this.state, await this.client.studies());
    }
    if (outcome.finished) {
      await this.refreshSecondary(study);
    }
    this.state = setBanner(this.state, null);
    this.render();
  }

  async run(): Promise<void> {
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

  stop(): void {
    this.running = false;
  }
}

export function boot(doc: Document = document): Dashboard {
  let token: string | null = null;
  try {
    token = localStorage.getItem(TOKEN_KEY);
  } catch {
    token = null;
  }
  const client = new ApiClient("", token);
  const byId = (id: string) => doc.getElementById(id) as HTMLElement;
  const dashboard = new Dashboard(client, {
    banner: byId("banner"),
    toast: byId("toast"),
    studies: byId("studies"),
    title: byId("study-title"),
    cases: byId("cases"),
    chartControls: byId("chart-controls"),
    chart: byId("chart"),
    tokenForm: byId("token-form") as HTMLFormElement,
    tokenInput: byId("token-input") as HTMLInputElement,
  });
  void dashboard.run();
  return dashboard;
}

declare global {
  interface Window {
    __labrunDashboard?: Dashboard;
  }
}

if (typeof document !== "undefined" && document.getElementById("studies")) {
  window.__labrunDashboard = boot();
}

/** Application shell: login, live map, status, scenario and rule panels.
 *
 * All data flows through the Session (wire pages over the gateway); the
 * poll loop refreshes statuses and flips a stale badge when two periods
 * pass without a successful fetch.
 */

import { EditorForm } from "./editor.js";
import { MapView, openDeviceDialog } from "./map.js";
import {
  decodeCapabilities,
  decodeHomeMap,
  decodeRobotStat,
  decodeRuleRow,
  decodeScenarioRow,
  decodeStat,
  decodeViolations,
  type Capabilities,
  type ScenarioRow,
} from "./model.js";
import { gatewayTransport, Session, WireError, type ConnectionSettings, type Transport } from "./protocol.js";

export interface AppOptions {
  transport?: Transport;
  pollSeconds?: number;
  /** test hook: skip the interval timer and poll only on demand */
  manualPolling?: boolean;
}

export class App {
  session: Session | null = null;
  caps: Capabilities = { devices: new Map(), robots: new Map() };
  scenarios: ScenarioRow[] = [];
  private view: MapView | null = null;
  private editor: EditorForm | null = null;
  private lastFetch = 0;
  private timer: ReturnType<typeof setInterval> | null = null;

  private loginPanel!: HTMLElement;
  private mainPanel!: HTMLElement;
  private staleBadge!: HTMLElement;
  private statusHost!: HTMLElement;
  private scenarioHost!: HTMLElement;
  private ruleHost!: HTMLElement;
  private robotHost!: HTMLElement;
  private editorHost!: HTMLElement;

  constructor(private root: HTMLElement, private options: AppOptions = {}) {
    this.buildShell();
  }

  private get pollSeconds(): number {
    return this.options.pollSeconds ?? 5;
  }

  private buildShell(): void {
    this.root.replaceChildren();
    this.loginPanel = this.buildLogin();
    this.mainPanel = document.createElement("div");
    this.mainPanel.hidden = true;
    this.staleBadge = document.createElement("span");
    this.staleBadge.className = "stale-badge";
    this.staleBadge.textContent = "stale data";
    this.staleBadge.hidden = true;

    const header = document.createElement("header");
    const title = document.createElement("h1");
    title.textContent = "Home Control";
    header.append(title, this.staleBadge);

    const mapSection = this.section("Map", "map-section");
    this.statusHost = this.section("Devices", "status-section");
    this.scenarioHost = this.section("Scenarios", "scenario-section");
    this.editorHost = this.section("Scenario editor", "editor-section");
    this.ruleHost = this.section("Rules", "rule-section");
    this.robotHost = this.section("Robots", "robot-section");
    this.mainPanel.append(mapSection, this.statusHost, this.scenarioHost, this.editorHost, this.ruleHost, this.robotHost);
    this.root.append(header, this.loginPanel, this.mainPanel);

    this.view = new MapView(mapSection, {
      onDeviceClick: (icon) =>
        openDeviceDialog(icon, {
          checkStatus: () => void this.showOneStatus(icon.oid),
          addScenario: () => this.openEditorFor(icon.oid),
        }),
    });
  }

  private section(label: string, className: string): HTMLElement {
    const host = document.createElement("section");
    host.className = className;
    const heading = document.createElement("h2");
    heading.textContent = label;
    host.append(heading);
    return host;
  }

  private buildLogin(): HTMLElement {
    const panel = document.createElement("form");
    panel.className = "login-panel";
    const fields: [string, string, string][] = [
      ["user", "User", "admin"],
      ["password", "Password", ""],
      ["specialCode", "Installation code", "24680"],
      ["sharedSecret", "Transport secret", "home-lab-secret"],
      ["credentialSalt", "Credential salt", "home-lab-salt"],
    ];
    for (const [name, label, preset] of fields) {
      const wrap = document.createElement("label");
      wrap.textContent = label;
      const input = document.createElement("input");
      input.name = name;
      input.value = preset;
      if (name === "password") input.type = "password";
      wrap.append(input);
      panel.append(wrap);
    }
    const button = document.createElement("button");
    button.textContent = "Log in";
    const error = document.createElement("p");
    error.className = "login-error";
    panel.append(button, error);
    panel.addEventListener("submit", (event) => {
      event.preventDefault();
      const data = new FormData(panel);
      const settings: ConnectionSettings = {
        user: String(data.get("user") ?? ""),
        password: String(data.get("password") ?? ""),
        specialCode: String(data.get("specialCode") ?? ""),
        sharedSecret: String(data.get("sharedSecret") ?? ""),
        credentialSalt: String(data.get("credentialSalt") ?? ""),
      };
      this.login(settings).catch((exc: unknown) => {
        error.textContent = exc instanceof WireError ? `login failed: ${exc.code}` : String(exc);
      });
    });
    return panel;
  }

  async login(settings: ConnectionSettings): Promise<void> {
    const transport = this.options.transport ?? gatewayTransport();
    const session = new Session(transport, settings);
    await session.login();
    this.session = session;
    this.loginPanel.hidden = true;
    this.mainPanel.hidden = false;
    await this.refreshAll();
    if (!this.options.manualPolling) {
      this.timer = setInterval(() => void this.poll(), this.pollSeconds * 1000);
    }
  }

  dispose(): void {
    if (this.timer !== null) clearInterval(this.timer);
  }

  /** Full refresh: capabilities, map, lists. */
  async refreshAll(): Promise<void> {
    if (!this.session) return;
    const caps = await this.session.request("devices.aspx");
    this.caps = decodeCapabilities(caps.lines);
    await this.refreshMap();
    await this.refreshScenarios();
    await this.refreshRules();
    await this.refreshRobots();
    this.buildEditor();
    this.renderStatusTable();
  }

  async refreshMap(): Promise<void> {
    if (!this.session || !this.view) return;
    try {
      const reply = await this.session.request("map.aspx");
      this.view.show(decodeHomeMap(reply.lines));
      this.markFresh();
    } catch (exc) {
      this.view.showError(exc instanceof Error ? exc.message : String(exc));
    }
  }

  /** One poll round: statuses only, cheap enough for every period. */
  async poll(): Promise<void> {
    if (!this.session || !this.view) return;
    try {
      const reply = await this.session.request("status.aspx");
      const stats = new Map(reply.lines.filter((l) => l.startsWith("STAT|")).map((l) => {
        const stat = decodeStat(l);
        return [stat.oid, stat] as const;
      }));
      this.view.refreshStats(stats);
      this.markFresh();
      this.renderStatusTable(stats);
    } catch {
      this.updateStaleBadge();
    }
  }

  private markFresh(): void {
    this.lastFetch = Date.now();
    this.updateStaleBadge();
  }

  updateStaleBadge(now = Date.now()): void {
    this.staleBadge.hidden = now - this.lastFetch <= 2 * this.pollSeconds * 1000;
  }

  private renderStatusTable(stats?: Map<number, { iconId: string; label: string }>): void {
    const table = document.createElement("table");
    for (const device of this.caps.devices.values()) {
      const row = table.insertRow();
      row.insertCell().textContent = String(device.oid);
      row.insertCell().textContent = device.name;
      row.insertCell().textContent = device.room;
      row.insertCell().textContent = stats?.get(device.oid)?.label ?? "";
    }
    this.statusHost.querySelector("table")?.remove();
    this.statusHost.append(table);
  }

  private async showOneStatus(oid: number): Promise<void> {
    if (!this.session) return;
    const reply = await this.session.request("status.aspx", [["oid", String(oid)]]);
    const stat = reply.lines.find((l) => l.startsWith("STAT|"));
    const note = document.createElement("p");
    note.className = "one-status";
    note.textContent = stat ? `${this.caps.devices.get(oid)?.name ?? oid}: ${decodeStat(stat).label}` : "no status";
    this.statusHost.querySelector(".one-status")?.remove();
    this.statusHost.append(note);
  }

  async refreshScenarios(): Promise<void> {
    if (!this.session) return;
    const reply = await this.session.request("scenario.aspx", [["action", "list"]]);
    this.scenarios = reply.lines.filter((l) => l.startsWith("SCN|")).map(decodeScenarioRow);
    const list = document.createElement("ul");
    for (const row of this.scenarios) {
      const item = document.createElement("li");
      const label = document.createElement("span");
      label.textContent = `${row.name}${row.enabled ? "" : " (disabled)"}`;
      const activate = document.createElement("button");
      activate.textContent = "Activate";
      activate.addEventListener("click", () => void this.activate(row.name, item));
      item.append(label, activate);
      list.append(item);
    }
    this.scenarioHost.querySelector("ul")?.remove();
    this.scenarioHost.append(list);
  }

  private async activate(name: string, item: HTMLElement): Promise<void> {
    if (!this.session) return;
    const note = document.createElement("em");
    try {
      const reply = await this.session.request("scenario.aspx", [["action", "activate"], ["name", name]]);
      note.textContent = reply.lines[0] ?? "activated";
    } catch (exc) {
      note.textContent = exc instanceof WireError ? `failed: ${exc.code}` : String(exc);
    }
    item.querySelector("em")?.remove();
    item.append(note);
  }

  async refreshRules(): Promise<void> {
    if (!this.session) return;
    const reply = await this.session.request("rule.aspx", [["action", "list"]]);
    const list = document.createElement("ul");
    for (const line of reply.lines.filter((l) => l.startsWith("RULE|"))) {
      const rule = decodeRuleRow(line);
      const item = document.createElement("li");
      item.textContent = `${rule.name}${rule.enabled ? "" : " (disabled)"}: ${rule.text}`;
      list.append(item);
    }
    this.ruleHost.querySelector("ul")?.remove();
    this.ruleHost.append(list);
  }

  async refreshRobots(): Promise<void> {
    if (!this.session) return;
    const reply = await this.session.request("robots.aspx");
    const list = document.createElement("ul");
    for (const line of reply.lines.filter((l) => l.startsWith("RSTAT|"))) {
      const stat = decodeRobotStat(line);
      const robot = this.caps.robots.get(stat.rid);
      const item = document.createElement("li");
      item.textContent = `${robot?.name ?? stat.rid} at ${stat.location}: ${stat.state} (${stat.queued} queued)`;
      list.append(item);
    }
    this.robotHost.querySelector("ul")?.remove();
    this.robotHost.append(list);
  }

  private buildEditor(): void {
    this.editorHost.querySelector(".editor")?.remove();
    const host = document.createElement("div");
    this.editorHost.append(host);
    this.editor = new EditorForm(
      host,
      this.caps,
      () => this.scenarios.map((s) => s.name),
      async (text) => {
        try {
          await this.session!.request("scenario.aspx", [["action", "add"], ["body", text]]);
          await this.refreshScenarios();
          return { ok: true };
        } catch (exc) {
          if (exc instanceof WireError && exc.code === "VALIDATION") {
            return { ok: false, problems: decodeViolations(exc.lines).map((v) => `${v.code}: ${v.message}`) };
          }
          return { ok: false, problems: [String(exc)] };
        }
      },
    );
  }

  openEditorFor(oid: number): void {
    this.editor?.presetDevice(oid);
    this.editorHost.scrollIntoView?.();
  }
}

export function mountApp(root: HTMLElement, options: AppOptions = {}): App {
  return new App(root, options);
}

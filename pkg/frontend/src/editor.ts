/** Scenario editor: draft rows constrained by the capability matrix.
 *
 * The draft compiles to the same text grammar the terminal client and
 * the SMS channel use, and submits through scenario.aspx, so the server
 * parses and validates it exactly like any other source.
 */

import type { Capabilities } from "./model.js";

export type ActorRef =
  | { device: number }
  | { robot: number }
  | { robot: number; device: number };

export type TimeDraft =
  | { mode: "now" }
  | { mode: "clock"; hour: number; minute: number }
  | { mode: "after"; minutes: number };

export type TaskRow =
  | { kind: "action"; actor: ActorRef | null; verb: string; param: string; time: TimeDraft }
  | { kind: "ref"; scenario: string; time: TimeDraft | null };

export function emptyActionRow(actor: ActorRef | null = null): TaskRow {
  return { kind: "action", actor, verb: "", param: "", time: { mode: "now" } };
}

export function emptyRefRow(): TaskRow {
  return { kind: "ref", scenario: "", time: null };
}

// -- choice helpers ---------------------------------------------------------

export interface ActorOption {
  label: string;
  actor: ActorRef;
}

/** Top-level actor choices: commandable devices, then robots. */
export function actorOptions(caps: Capabilities): ActorOption[] {
  const options: ActorOption[] = [];
  for (const device of caps.devices.values()) {
    if (device.verbs.size > 0) options.push({ label: device.name, actor: { device: device.oid } });
  }
  for (const robot of caps.robots.values()) {
    options.push({ label: robot.name, actor: { robot: robot.rid } });
  }
  return options;
}

/** Once a robot is picked, it can act itself or on its delegated devices. */
export function robotTargets(caps: Capabilities, rid: number): ActorOption[] {
  const robot = caps.robots.get(rid);
  if (!robot) return [];
  const options: ActorOption[] = [{ label: `${robot.name} itself`, actor: { robot: rid } }];
  const seen = new Set<number>();
  for (const delegation of robot.delegations) {
    if (!delegation.enabled || seen.has(delegation.oid)) continue;
    seen.add(delegation.oid);
    const device = caps.devices.get(delegation.oid);
    if (device) options.push({ label: device.name, actor: { robot: rid, device: device.oid } });
  }
  return options;
}

export interface VerbOption {
  verb: string;
  domain: string;
}

export function verbOptions(caps: Capabilities, actor: ActorRef): VerbOption[] {
  if ("device" in actor && !("robot" in actor)) {
    const device = caps.devices.get(actor.device);
    return device ? [...device.verbs].map(([verb, domain]) => ({ verb, domain })) : [];
  }
  const robot = caps.robots.get(actor.robot);
  if (!robot) return [];
  if ("device" in actor) {
    const device = caps.devices.get(actor.device);
    return robot.delegations
      .filter((d) => d.enabled && d.oid === actor.device)
      .map((d) => ({ verb: d.verb, domain: device?.verbs.get(d.verb) ?? "none" }));
  }
  return robot.verbs.filter((v) => v.enabled).map((v) => ({ verb: v.name, domain: v.domain }));
}

export function actorLabel(caps: Capabilities, actor: ActorRef): string {
  if ("robot" in actor) {
    const robot = caps.robots.get(actor.robot)?.name ?? `robot ${actor.robot}`;
    if ("device" in actor) {
      const device = caps.devices.get(actor.device)?.name ?? `device ${actor.device}`;
      return `${robot} -> ${device}`;
    }
    return robot;
  }
  return caps.devices.get(actor.device)?.name ?? `device ${actor.device}`;
}

// -- compilation -----------------------------------------------------------

function timeText(time: TimeDraft): string {
  if (time.mode === "now") return "Now";
  if (time.mode === "clock") return `${time.hour}:${String(time.minute).padStart(2, "0")}`;
  return `In ${time.minutes} Minutes`;
}

export function validateDraft(name: string, rows: TaskRow[], caps: Capabilities): string[] {
  const problems: string[] = [];
  if (!name.trim()) problems.push("scenario needs a name");
  if (rows.length === 0) problems.push("scenario needs at least one task");
  rows.forEach((row, index) => {
    const where = `task ${index + 1}`;
    if (row.kind === "ref") {
      if (!row.scenario.trim()) problems.push(`${where}: pick a scenario to include`);
      return;
    }
    if (!row.actor) {
      problems.push(`${where}: pick an actor`);
      return;
    }
    if (!row.verb) {
      problems.push(`${where}: pick an action`);
      return;
    }
    const domain = verbOptions(caps, row.actor).find((v) => v.verb === row.verb)?.domain;
    if (domain === undefined) problems.push(`${where}: ${row.verb} is not available for this actor`);
    else if (domain !== "none" && !row.param.trim()) problems.push(`${where}: ${row.verb} needs a ${domain}`);
    else if (domain === "none" && row.param.trim()) problems.push(`${where}: ${row.verb} takes no value`);
    if (row.time.mode === "after" && row.time.minutes < 1) problems.push(`${where}: delay must be at least 1 minute`);
    if (row.time.mode === "clock" && (row.time.hour < 0 || row.time.hour > 23 || row.time.minute < 0 || row.time.minute > 59)) {
      problems.push(`${where}: clock time out of range`);
    }
  });
  return problems;
}

/** Compile the draft to the canonical text grammar. */
export function draftText(name: string, rows: TaskRow[], caps: Capabilities): string {
  const lines = [`Scenario name: ${name.trim()}`];
  rows.forEach((row, index) => {
    const ordinal = `${String.fromCharCode(65 + (index % 26))}. `;
    if (row.kind === "ref") {
      const suffix = row.time ? ` @ ${timeText(row.time)}` : "";
      lines.push(`${ordinal}[${row.scenario.trim()}]${suffix}`);
    } else {
      const param = row.param.trim() ? ` (${row.param.trim()})` : "";
      lines.push(`${ordinal}${actorLabel(caps, row.actor!)}: ${row.verb}${param} @ ${timeText(row.time)}`);
    }
  });
  return lines.join("\n") + "\n";
}

// -- DOM form ---------------------------------------------------------------

export interface EditorSubmit {
  (text: string): Promise<{ ok: true } | { ok: false; problems: string[] }>;
}

export class EditorForm {
  rows: TaskRow[] = [];
  private nameInput: HTMLInputElement;
  private rowsHost: HTMLDivElement;
  private problemsHost: HTMLUListElement;

  constructor(
    private container: HTMLElement,
    private caps: Capabilities,
    private scenarioNames: () => string[],
    private submit: EditorSubmit,
  ) {
    container.classList.add("editor");
    this.nameInput = document.createElement("input");
    this.nameInput.placeholder = "Scenario name";
    this.nameInput.className = "editor-name";
    this.rowsHost = document.createElement("div");
    this.problemsHost = document.createElement("ul");
    this.problemsHost.className = "editor-problems";
    const addAction = document.createElement("button");
    addAction.textContent = "Add task";
    addAction.addEventListener("click", () => {
      this.rows.push(emptyActionRow());
      this.renderRows();
    });
    const addRef = document.createElement("button");
    addRef.textContent = "Include scenario";
    addRef.addEventListener("click", () => {
      this.rows.push(emptyRefRow());
      this.renderRows();
    });
    const save = document.createElement("button");
    save.textContent = "Save scenario";
    save.className = "editor-save";
    save.addEventListener("click", () => void this.trySubmit());
    container.append(this.nameInput, this.rowsHost, addAction, addRef, save, this.problemsHost);
    this.renderRows();
  }

  /** Open with one row preset to a device, for the map dialog route.
   *
   * A device without verbs of its own is preset through a robot that
   * has a delegation for it, when one exists.
   */
  presetDevice(oid: number): void {
    let actor: ActorRef | null = null;
    if ((this.caps.devices.get(oid)?.verbs.size ?? 0) > 0) {
      actor = { device: oid };
    } else {
      for (const robot of this.caps.robots.values()) {
        if (robot.delegations.some((d) => d.enabled && d.oid === oid)) {
          actor = { robot: robot.rid, device: oid };
          break;
        }
      }
    }
    this.rows = [emptyActionRow(actor)];
    this.renderRows();
  }

  setName(name: string): void {
    this.nameInput.value = name;
  }

  get name(): string {
    return this.nameInput.value;
  }

  async trySubmit(): Promise<boolean> {
    const problems = validateDraft(this.nameInput.value, this.rows, this.caps);
    if (problems.length) {
      this.showProblems(problems);
      return false;
    }
    const outcome = await this.submit(draftText(this.nameInput.value, this.rows, this.caps));
    if (!outcome.ok) {
      this.showProblems(outcome.problems);
      return false;
    }
    this.showProblems([]);
    return true;
  }

  private showProblems(problems: string[]): void {
    this.problemsHost.replaceChildren(
      ...problems.map((problem) => {
        const item = document.createElement("li");
        item.textContent = problem;
        return item;
      }),
    );
  }

  private renderRows(): void {
    this.rowsHost.replaceChildren(...this.rows.map((row, index) => this.renderRow(row, index)));
  }

  private renderRow(row: TaskRow, index: number): HTMLElement {
    const host = document.createElement("div");
    host.className = "editor-row";
    if (row.kind === "ref") {
      const pick = document.createElement("select");
      pick.append(new Option("pick a scenario", ""));
      for (const name of this.scenarioNames()) pick.append(new Option(name, name));
      pick.value = row.scenario;
      pick.addEventListener("change", () => {
        row.scenario = pick.value;
      });
      host.append(pick, this.renderTime(row, true));
    } else {
      host.append(this.renderActorPickers(row), this.renderVerbPicker(row), this.renderParam(row), this.renderTime(row, false));
    }
    const remove = document.createElement("button");
    remove.textContent = "Remove";
    remove.addEventListener("click", () => {
      this.rows.splice(index, 1);
      this.renderRows();
    });
    host.append(remove);
    return host;
  }

  private renderActorPickers(row: TaskRow & { kind: "action" }): HTMLElement {
    const wrap = document.createElement("span");
    const top = document.createElement("select");
    top.className = "pick-actor";
    top.append(new Option("pick an actor", ""));
    for (const option of actorOptions(this.caps)) {
      top.append(new Option(option.label, JSON.stringify(option.actor)));
    }
    const current = row.actor && ("robot" in row.actor ? { robot: row.actor.robot } : row.actor);
    top.value = current ? JSON.stringify(current) : "";
    top.addEventListener("change", () => {
      row.actor = top.value ? (JSON.parse(top.value) as ActorRef) : null;
      row.verb = "";
      row.param = "";
      this.renderRows();
    });
    wrap.append(top);
    if (row.actor && "robot" in row.actor) {
      const narrow = document.createElement("select");
      narrow.className = "pick-target";
      for (const option of robotTargets(this.caps, row.actor.robot)) {
        narrow.append(new Option(option.label, JSON.stringify(option.actor)));
      }
      narrow.value = JSON.stringify(row.actor);
      narrow.addEventListener("change", () => {
        row.actor = JSON.parse(narrow.value) as ActorRef;
        row.verb = "";
        row.param = "";
        this.renderRows();
      });
      wrap.append(narrow);
    }
    return wrap;
  }

  private renderVerbPicker(row: TaskRow & { kind: "action" }): HTMLElement {
    const pick = document.createElement("select");
    pick.className = "pick-verb";
    pick.append(new Option("action", ""));
    if (row.actor) {
      for (const option of verbOptions(this.caps, row.actor)) {
        pick.append(new Option(option.verb, option.verb));
      }
    }
    pick.value = row.verb;
    pick.addEventListener("change", () => {
      row.verb = pick.value;
      this.renderRows();
    });
    return pick;
  }

  private renderParam(row: TaskRow & { kind: "action" }): HTMLElement {
    const input = document.createElement("input");
    input.className = "pick-param";
    const domain = row.actor && row.verb
      ? verbOptions(this.caps, row.actor).find((v) => v.verb === row.verb)?.domain
      : undefined;
    input.placeholder = domain && domain !== "none" ? domain : "";
    input.hidden = !domain || domain === "none";
    input.value = row.param;
    input.addEventListener("input", () => {
      row.param = input.value;
    });
    return input;
  }

  private renderTime(row: TaskRow, optional: boolean): HTMLElement {
    const wrap = document.createElement("span");
    const mode = document.createElement("select");
    mode.className = "pick-time";
    if (optional) mode.append(new Option("inherit time", "inherit"));
    mode.append(new Option("Now", "now"), new Option("At clock time", "clock"), new Option("In N minutes", "after"));
    const current = row.time;
    mode.value = current === null ? "inherit" : current.mode;
    const detail = document.createElement("input");
    detail.className = "pick-time-detail";
    const syncDetail = () => {
      const time = row.time;
      detail.hidden = time === null || time.mode === "now";
      if (time?.mode === "clock") {
        detail.placeholder = "HH:MM";
        detail.value = detail.value || `${time.hour}:${String(time.minute).padStart(2, "0")}`;
      } else if (time?.mode === "after") {
        detail.placeholder = "minutes";
        detail.value = detail.value || String(time.minutes);
      }
    };
    mode.addEventListener("change", () => {
      detail.value = "";
      if (mode.value === "inherit") row.time = null;
      else if (mode.value === "now") row.time = { mode: "now" };
      else if (mode.value === "clock") row.time = { mode: "clock", hour: 12, minute: 0 };
      else row.time = { mode: "after", minutes: 5 };
      syncDetail();
    });
    detail.addEventListener("input", () => {
      if (row.time?.mode === "clock") {
        const match = /^(\d{1,2}):(\d{2})$/.exec(detail.value);
        if (match) row.time = { mode: "clock", hour: Number(match[1]), minute: Number(match[2]) };
      } else if (row.time?.mode === "after") {
        const minutes = Number(detail.value);
        if (Number.isInteger(minutes)) row.time = { mode: "after", minutes };
      }
    });
    syncDetail();
    wrap.append(mode, detail);
    return wrap;
  }
}

/** Decoding payload lines into the view model.
 *
 * Every record type the pages emit has a decoder here; malformed lines
 * throw so callers can keep the last good snapshot and show a banner.
 */

import { percentDecode } from "./protocol.js";

export interface Wall {
  width: number;
  rgb: [number, number, number];
  points: [number, number][];
}

export interface MapIcon {
  oid: number;
  name: string;
  pos: [number, number];
  iconId: string;
}

export interface DeviceStat {
  oid: number;
  iconId: string;
  label: string;
}

export interface DeviceCap {
  oid: number;
  name: string;
  kind: string;
  category: string;
  tier: string;
  /** verb name -> parameter domain ("none" when the verb takes nothing) */
  verbs: Map<string, string>;
  room: string;
}

export interface Delegation {
  oid: number;
  verb: string;
  enabled: boolean;
}

export interface RobotCap {
  rid: number;
  name: string;
  enabled: boolean;
  /** own verbs with domains; disabled verbs carry enabled=false */
  verbs: { name: string; domain: string; enabled: boolean }[];
  delegations: Delegation[];
}

export interface ScenarioRow {
  name: string;
  enabled: boolean;
  text: string;
}

export interface RuleRow {
  name: string;
  enabled: boolean;
  text: string;
}

export interface RobotStat {
  rid: number;
  location: string;
  state: string;
  queued: number;
}

export interface HomeMap {
  walls: Wall[];
  icons: MapIcon[];
  stats: Map<number, DeviceStat>;
}

function fail(line: string, why: string): never {
  throw new Error(`${why}: ${JSON.stringify(line)}`);
}

function intField(raw: string | undefined, line: string, what: string): number {
  if (raw === undefined || !/^-?\d+$/.test(raw)) fail(line, `bad ${what}`);
  return parseInt(raw, 10);
}

function pair(raw: string | undefined, line: string): [number, number] {
  const parts = (raw ?? "").split(",");
  if (parts.length !== 2) fail(line, "expected x,y pair");
  return [intField(parts[0], line, "x"), intField(parts[1], line, "y")];
}

export function decodeWall(line: string): Wall {
  const packed = line.slice("WALL|".length).split(";").map((p) => pair(p, line));
  if (packed.length < 4) fail(line, "wall needs two header pairs and two vertices");
  const [head, tint, ...points] = packed as [
    [number, number],
    [number, number],
    ...[number, number][],
  ];
  const wall: Wall = { width: head[0], rgb: [head[1], tint[0], tint[1]], points };
  if (wall.width < 1) fail(line, "wall width must be positive");
  return wall;
}

export function decodeIcon(line: string): MapIcon {
  const parts = line.split("|");
  if (parts.length !== 5) fail(line, "icon needs 5 fields");
  return {
    oid: intField(parts[1], line, "oid"),
    name: percentDecode(parts[2]!),
    pos: pair(parts[3], line),
    iconId: parts[4]!,
  };
}

export function decodeStat(line: string): DeviceStat {
  const parts = line.split("|");
  if (parts.length !== 4) fail(line, "status needs 4 fields");
  return {
    oid: intField(parts[1], line, "oid"),
    iconId: parts[2]!,
    label: percentDecode(parts[3]!),
  };
}

/** Decode a map page reply; foreign line kinds are ignored on purpose. */
export function decodeHomeMap(lines: string[]): HomeMap {
  const map: HomeMap = { walls: [], icons: [], stats: new Map() };
  for (const line of lines) {
    if (line.startsWith("WALL|")) map.walls.push(decodeWall(line));
    else if (line.startsWith("ICON|")) map.icons.push(decodeIcon(line));
    else if (line.startsWith("STAT|")) {
      const stat = decodeStat(line);
      map.stats.set(stat.oid, stat);
    }
  }
  if (map.walls.length === 0 && map.icons.length === 0) {
    throw new Error("map payload had no WALL or ICON lines");
  }
  return map;
}

function decodeVerbs(raw: string): { name: string; domain: string; enabled: boolean }[] {
  if (raw === "") return [];
  return raw.split(";").map((item) => {
    const enabled = !item.endsWith("!");
    const text = enabled ? item : item.slice(0, -1);
    const match = /^(.+)\((.*)\)$/.exec(text);
    if (!match) fail(raw, "bad verb item");
    return { name: match[1]!, domain: match[2]!, enabled };
  });
}

export function decodeDevice(line: string): DeviceCap {
  const parts = line.split("|");
  if (parts.length !== 8) fail(line, "device needs 8 fields");
  return {
    oid: intField(parts[1], line, "oid"),
    name: percentDecode(parts[2]!),
    kind: parts[3]!,
    category: parts[4]!,
    tier: parts[5]!,
    verbs: new Map(decodeVerbs(parts[6]!).map((v) => [v.name, v.domain])),
    room: percentDecode(parts[7]!),
  };
}

export function decodeRobot(line: string): RobotCap {
  const parts = line.split("|");
  if (parts.length !== 6) fail(line, "robot needs 6 fields");
  const delegations: Delegation[] = [];
  if (parts[5] !== "") {
    for (const item of parts[5]!.split(";")) {
      const enabled = !item.endsWith("!");
      const text = enabled ? item : item.slice(0, -1);
      const [oid, verb] = text.split(":");
      if (!oid || verb === undefined) fail(line, "bad delegation item");
      delegations.push({ oid: intField(oid, line, "delegation oid"), verb, enabled });
    }
  }
  return {
    rid: intField(parts[1], line, "rid"),
    name: percentDecode(parts[2]!),
    enabled: parts[3] === "1",
    verbs: decodeVerbs(parts[4]!),
    delegations,
  };
}

export interface Capabilities {
  devices: Map<number, DeviceCap>;
  robots: Map<number, RobotCap>;
}

export function decodeCapabilities(lines: string[]): Capabilities {
  const caps: Capabilities = { devices: new Map(), robots: new Map() };
  for (const line of lines) {
    if (line.startsWith("DEV|")) {
      const device = decodeDevice(line);
      caps.devices.set(device.oid, device);
    } else if (line.startsWith("ROB|")) {
      const robot = decodeRobot(line);
      caps.robots.set(robot.rid, robot);
    }
  }
  return caps;
}

export function decodeScenarioRow(line: string): ScenarioRow {
  const parts = line.split("|");
  if (parts.length !== 4) fail(line, "scenario row needs 4 fields");
  return { name: percentDecode(parts[1]!), enabled: parts[2] === "1", text: percentDecode(parts[3]!) };
}

export function decodeRuleRow(line: string): RuleRow {
  const parts = line.split("|");
  if (parts.length !== 4) fail(line, "rule row needs 4 fields");
  return { name: percentDecode(parts[1]!), enabled: parts[2] === "1", text: percentDecode(parts[3]!) };
}

export function decodeRobotStat(line: string): RobotStat {
  const parts = line.split("|");
  if (parts.length !== 5) fail(line, "robot status needs 5 fields");
  return {
    rid: intField(parts[1], line, "rid"),
    location: percentDecode(parts[2]!),
    state: percentDecode(parts[3]!),
    queued: intField(parts[4], line, "queue length"),
  };
}

/** VIOL lines following an ERR VALIDATION status. */
export function decodeViolations(lines: string[]): { code: string; message: string }[] {
  return lines
    .filter((line) => line.startsWith("VIOL|"))
    .map((line) => {
      const parts = line.split("|");
      return { code: parts[1] ?? "", message: parts.slice(2).join("|") };
    });
}

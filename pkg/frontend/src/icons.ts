/** Bundled SVG icon set.
 *
 * An icon id is `<base>_<state>`; the base names a device family and the
 * state suffix carries the live status.  Unknown bases degrade to one of
 * four generic families picked by the state suffix alone, so any device
 * the server invents later still renders something truthful.
 */

type Painter = (state: string) => string;

const ON = "#2e9e44";
const OFF = "#8a8a8a";
const ALERT = "#d23c2e";
const BUSY = "#c78a1b";
const INK = "#404040";

function svg(body: string): string {
  return `<svg viewBox="0 0 24 24" width="24" height="24" xmlns="http://www.w3.org/2000/svg">${body}</svg>`;
}

function onOffColor(state: string): string {
  if (state === "busy") return BUSY;
  return state === "on" ? ON : OFF;
}

function levelBucket(state: string): number {
  const n = parseInt(state, 10);
  return Number.isNaN(n) ? 0 : Math.min(9, Math.max(0, n));
}

const painters: Record<string, Painter> = {
  sprinkler: (state) =>
    svg(
      `<rect x="10" y="12" width="4" height="9" fill="${INK}"/>` +
        `<circle cx="12" cy="10" r="3" fill="${onOffColor(state)}"/>` +
        (state === "on"
          ? `<path d="M5 6 L9 9 M19 6 L15 9 M12 3 L12 7" stroke="${ON}" stroke-width="2" fill="none"/>`
          : ""),
    ),
  washer: (state) =>
    svg(
      `<rect x="4" y="4" width="16" height="16" rx="2" fill="none" stroke="${INK}" stroke-width="2"/>` +
        `<circle cx="12" cy="13" r="5" fill="none" stroke="${onOffColor(state)}" stroke-width="2"/>` +
        `<circle cx="7" cy="7" r="1" fill="${onOffColor(state)}"/>`,
    ),
  door: (state) =>
    state === "open"
      ? svg(
          `<rect x="4" y="3" width="3" height="18" fill="${INK}"/>` +
            `<path d="M7 3 L17 6 L17 24 L7 21 Z" fill="${ON}" opacity="0.7"/>`,
        )
      : svg(
          `<rect x="5" y="3" width="14" height="18" fill="none" stroke="${INK}" stroke-width="2"/>` +
            `<circle cx="16" cy="12" r="1.5" fill="${INK}"/>`,
        ),
  thermometer: (state) => {
    const bucket = levelBucket(state);
    const top = 18 - bucket * 1.4;
    const hot = bucket >= 7;
    return svg(
      `<rect x="10" y="3" width="4" height="14" rx="2" fill="none" stroke="${INK}" stroke-width="1.5"/>` +
        `<rect x="11" y="${top.toFixed(1)}" width="2" height="${(19 - top).toFixed(1)}" fill="${hot ? ALERT : "#2d7fd3"}"/>` +
        `<circle cx="12" cy="19" r="3.4" fill="${hot ? ALERT : "#2d7fd3"}"/>`,
    );
  },
  gas: (state) =>
    svg(
      `<path d="M12 3 C16 8 18 11 18 15 a6 6 0 0 1 -12 0 C6 11 8 8 12 3 Z" ` +
        `fill="${state === "on" ? ALERT : "none"}" stroke="${state === "on" ? ALERT : OFF}" stroke-width="2"/>`,
    ),
  furniture: (state) =>
    state === "sofa"
      ? svg(
          `<rect x="3" y="10" width="18" height="7" rx="2" fill="#b4906a"/>` +
            `<rect x="3" y="7" width="4" height="8" rx="1.5" fill="#97744f"/>` +
            `<rect x="17" y="7" width="4" height="8" rx="1.5" fill="#97744f"/>`,
        )
      : svg(
          `<rect x="4" y="8" width="16" height="3" fill="#b4906a"/>` +
            `<rect x="6" y="11" width="2" height="7" fill="#97744f"/>` +
            `<rect x="16" y="11" width="2" height="7" fill="#97744f"/>`,
        ),
  onoff: (state) =>
    svg(`<circle cx="12" cy="12" r="8" fill="${onOffColor(state)}"/>` +
      `<rect x="11" y="6" width="2" height="6" fill="#ffffff"/>`),
  level: (state) => {
    const bucket = levelBucket(state);
    return svg(
      `<rect x="5" y="5" width="14" height="14" fill="none" stroke="${INK}" stroke-width="2"/>` +
        `<rect x="7" y="${(17 - bucket).toFixed(1)}" width="10" height="${(bucket + 0.5).toFixed(1)}" fill="#2d7fd3"/>`,
    );
  },
  presence: (state) =>
    svg(
      `<circle cx="12" cy="8" r="4" fill="${state === "in" ? ON : OFF}"/>` +
        `<path d="M5 21 a7 7 0 0 1 14 0 Z" fill="${state === "in" ? ON : OFF}"/>`,
    ),
  aperture: (state) =>
    svg(
      `<rect x="4" y="4" width="16" height="16" fill="none" stroke="${INK}" stroke-width="2"/>` +
        (state === "open"
          ? `<path d="M4 4 L20 20 M20 4 L4 20" stroke="${ON}" stroke-width="2"/>`
          : `<rect x="8" y="8" width="8" height="8" fill="${OFF}"/>`),
    ),
  custom: () =>
    svg(
      `<rect x="5" y="5" width="14" height="14" rx="3" fill="none" stroke="${INK}" stroke-width="2"/>` +
        `<text x="12" y="16" font-size="10" text-anchor="middle" fill="${INK}">?</text>`,
    ),
};

function splitIconId(iconId: string): { base: string; state: string } {
  const cut = iconId.lastIndexOf("_");
  if (cut <= 0) return { base: iconId, state: "" };
  return { base: iconId.slice(0, cut), state: iconId.slice(cut + 1) };
}

/** Map an unknown base onto one of the four generic families by state. */
export function fallbackFamily(state: string): string {
  if (state === "on" || state === "off" || state === "busy") return "onoff";
  if (/^\d$/.test(state)) return "level";
  if (state === "in" || state === "out") return "presence";
  if (state === "open" || state === "closed") return "aperture";
  return "custom";
}

export function svgFor(iconId: string): string {
  const { base, state } = splitIconId(iconId);
  const painter = painters[base] ?? painters[fallbackFamily(state)]!;
  return painter(state);
}

/** Wire client: request lines over the HTTP gateway, auth handshake, replies.
 *
 * Every exchange is one GET of `/<page>.aspx?<query>` returning the
 * protocol's payload lines as text/plain.  The UI never talks to any
 * other endpoint, so all state changes go through documented pages.
 */

export type Transport = (pathAndQuery: string) => Promise<string>;

export interface Reply {
  ok: boolean;
  /** error code without the ERR prefix, "" when ok */
  code: string;
  /** payload lines after the status line */
  lines: string[];
}

const UNRESERVED = /^[A-Za-z0-9_.~-]$/;

/** Mirror of the server's component encoding: everything but unreserved. */
export function percentEncode(text: string): string {
  const bytes = new TextEncoder().encode(text);
  let out = "";
  for (const byte of bytes) {
    const ch = String.fromCharCode(byte);
    out += UNRESERVED.test(ch) ? ch : "%" + byte.toString(16).toUpperCase().padStart(2, "0");
  }
  return out;
}

export function percentDecode(text: string): string {
  if (/%(?![0-9A-Fa-f]{2})/.test(text)) {
    throw new Error(`bad percent-escape in ${JSON.stringify(text)}`);
  }
  const bytes: number[] = [];
  for (let i = 0; i < text.length; i++) {
    if (text[i] === "%") {
      bytes.push(parseInt(text.slice(i + 1, i + 3), 16));
      i += 2;
    } else {
      bytes.push(text.charCodeAt(i));
    }
  }
  return new TextDecoder().decode(new Uint8Array(bytes));
}

export function buildRequest(page: string, params: [string, string][]): string {
  if (params.length === 0) return page;
  const query = params
    .map(([k, v]) => `${percentEncode(k)}=${percentEncode(v)}`)
    .join("&");
  return `${page}?${query}`;
}

export function parseReply(text: string): Reply {
  const lines = text.split("\n");
  while (lines.length && lines[lines.length - 1] === "") lines.pop();
  const status = lines.shift() ?? "";
  if (status === "OK") return { ok: true, code: "", lines };
  if (status.startsWith("ERR ")) return { ok: false, code: status.slice(4).trim(), lines };
  throw new Error(`unrecognized status line ${JSON.stringify(status)}`);
}

// ---------------------------------------------------------------------------
// hashing and the magic handshake

function toHex(bytes: Uint8Array): string {
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}

function fromHex(hex: string): Uint8Array {
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) out[i] = parseInt(hex.slice(2 * i, 2 * i + 2), 16);
  return out;
}

async function sha256Hex(data: Uint8Array): Promise<string> {
  const digest = await crypto.subtle.digest("SHA-256", data as BufferSource);
  return toHex(new Uint8Array(digest));
}

async function sha256HexOfText(text: string): Promise<string> {
  return sha256Hex(new TextEncoder().encode(text));
}

/** XOR the hex ciphertext with sha256(secret || nonce) repeated. */
export async function decryptMagic(secret: string, nonceHex: string, cipherHex: string): Promise<string> {
  const seed = new TextEncoder().encode(secret);
  const nonce = fromHex(nonceHex);
  const material = new Uint8Array(seed.length + nonce.length);
  material.set(seed);
  material.set(nonce, seed.length);
  const block = new Uint8Array(await crypto.subtle.digest("SHA-256", material as BufferSource)).slice(0, 16);
  const cipher = fromHex(cipherHex);
  const plain = cipher.map((byte, i) => byte ^ block[i % block.length]!);
  return new TextDecoder().decode(plain);
}

export function deriveDigest(salt: string, user: string, password: string): Promise<string> {
  return sha256HexOfText(`${salt}:${user}:${password}`);
}

export function hashCredentials(user: string, digest: string, magic: string): Promise<string> {
  return sha256HexOfText(`${user}:${digest}:${magic}`);
}

// ---------------------------------------------------------------------------
// session

export interface ConnectionSettings {
  specialCode: string;
  sharedSecret: string;
  credentialSalt: string;
  user: string;
  password: string;
}

export class WireError extends Error {
  constructor(public code: string, public lines: string[]) {
    super(lines[0] ?? code);
  }
}

/** Authenticated client with a transparent re-handshake on expiry.
 *
 * One request in flight per page: concurrent callers for the same page
 * share the pending fetch instead of stacking requests.
 */
export class Session {
  private magic: string | null = null;
  private digest: string | null = null;
  private inflight = new Map<string, Promise<Reply>>();

  constructor(private transport: Transport, private settings: ConnectionSettings) {}

  private async handshake(): Promise<void> {
    const reply = parseReply(
      await this.transport(buildRequest("auth.aspx", [["code", this.settings.specialCode]])),
    );
    if (!reply.ok) throw new WireError(reply.code, reply.lines);
    const [nonce, cipher] = reply.lines;
    if (!nonce || !cipher) throw new WireError("MALFORMED_REPLY", reply.lines);
    this.magic = await decryptMagic(this.settings.sharedSecret, nonce, cipher);
    this.digest ??= await deriveDigest(
      this.settings.credentialSalt,
      this.settings.user,
      this.settings.password,
    );
  }

  private async authParams(): Promise<[string, string][]> {
    if (this.magic === null) await this.handshake();
    const proof = await hashCredentials(this.settings.user, this.digest!, this.magic!);
    return [
      ["user", this.settings.user],
      ["auth", proof],
    ];
  }

  /** Request an authenticated page; retries once through a fresh magic. */
  async request(page: string, params: [string, string][] = []): Promise<Reply> {
    const key = buildRequest(page, params);
    const pending = this.inflight.get(key);
    if (pending) return pending;
    const work = this.requestNow(page, params).finally(() => this.inflight.delete(key));
    this.inflight.set(key, work);
    return work;
  }

  private async requestNow(page: string, params: [string, string][]): Promise<Reply> {
    let reply = parseReply(await this.transport(buildRequest(page, [...(await this.authParams()), ...params])));
    if (!reply.ok && (reply.code === "EXPIRED" || reply.code === "AUTH") && this.magic !== null) {
      this.magic = null;
      reply = parseReply(await this.transport(buildRequest(page, [...(await this.authParams()), ...params])));
    }
    if (!reply.ok) throw new WireError(reply.code, reply.lines);
    return reply;
  }

  async login(): Promise<{ user: string; ttl: number }> {
    const reply = await this.request("login.aspx");
    return { user: reply.lines[0] ?? "", ttl: Number(reply.lines[1] ?? 0) };
  }
}

/** Transport over the HTTP gateway on the same origin (or a given base). */
export function gatewayTransport(base = ""): Transport {
  return async (pathAndQuery: string) => {
    const response = await fetch(`${base}/${pathAndQuery}`);
    if (!response.ok) throw new Error(`gateway returned HTTP ${response.status}`);
    return response.text();
  };
}

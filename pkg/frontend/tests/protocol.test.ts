import { describe, expect, test } from "vitest";
import {
  buildRequest,
  decryptMagic,
  deriveDigest,
  hashCredentials,
  parseReply,
  percentDecode,
  percentEncode,
  Session,
  WireError,
  type Transport,
} from "../src/protocol.js";

describe("percent codec", () => {
  test("round trips awkward text", () => {
    for (const text of ["plain", "two words", "a&b=c?d", "100%", "Home robot→W", "x|y"]) {
      expect(percentDecode(percentEncode(text))).toBe(text);
    }
  });

  test("matches the server's encoding of a scenario body", () => {
    expect(percentEncode("Scenario name: X\nA. S: on @ Now")).toBe(
      "Scenario%20name%3A%20X%0AA.%20S%3A%20on%20%40%20Now",
    );
  });

  test("rejects dangling escapes", () => {
    expect(() => percentDecode("50%")).toThrow(/percent-escape/);
    expect(() => percentDecode("%zz")).toThrow(/percent-escape/);
  });
});

describe("request lines and replies", () => {
  test("builds page?k=v&k=v", () => {
    expect(buildRequest("status.aspx", [["user", "admin"], ["oid", "5"]])).toBe(
      "status.aspx?user=admin&oid=5",
    );
    expect(buildRequest("devices.aspx", [])).toBe("devices.aspx");
  });

  test("parses OK and ERR replies", () => {
    expect(parseReply("OK\nline one\nline two\n")).toEqual({
      ok: true,
      code: "",
      lines: ["line one", "line two"],
    });
    expect(parseReply("ERR EXPIRED\nmagic expired\n")).toEqual({
      ok: false,
      code: "EXPIRED",
      lines: ["magic expired"],
    });
    expect(() => parseReply("HTTP garbage")).toThrow(/unrecognized/);
  });
});

describe("handshake math", () => {
  // vector frozen from the server implementation
  const NONCE = "000102030405060708090a0b0c0d0e0f";
  const CIPHER = "2169aca0aa33ee67d417c6fb518154e42169aca0aa33ee67d417c6fb518154e4";
  const MAGIC = "0123456789abcdef0123456789abcdef";

  test("decrypts the magic with the shared keystream", async () => {
    expect(await decryptMagic("sekrit", NONCE, CIPHER)).toBe(MAGIC);
  });

  test("derives digest and proof the way the server does", async () => {
    const digest = await deriveDigest("s1", "admin", "123456");
    expect(digest).toBe("18f0045de9d91155db929b2330badc96f0aa70eacf6e961db10b384325526206");
    expect(await hashCredentials("admin", digest, MAGIC)).toBe(
      "af1ebc3cefb73787d6d14a834d5027d088704797b95b56dba932c9d1898961ec",
    );
  });
});

function scriptedTransport(script: (line: string, n: number) => string): { transport: Transport; seen: string[] } {
  const seen: string[] = [];
  const transport: Transport = async (line) => {
    seen.push(line);
    return script(line, seen.length);
  };
  return { transport, seen };
}

const SETTINGS = {
  specialCode: "24680",
  sharedSecret: "sekrit",
  credentialSalt: "s1",
  user: "admin",
  password: "123456",
};

const NONCE = "000102030405060708090a0b0c0d0e0f";
const CIPHER = "2169aca0aa33ee67d417c6fb518154e42169aca0aa33ee67d417c6fb518154e4";

describe("session", () => {
  test("handshakes once, then reuses the magic", async () => {
    const { transport, seen } = scriptedTransport((line) => {
      if (line.startsWith("auth.aspx")) return `OK\n${NONCE}\n${CIPHER}\n`;
      return "OK\nadmin\n300\n";
    });
    const session = new Session(transport, SETTINGS);
    await session.login();
    await session.request("devices.aspx");
    const handshakes = seen.filter((line) => line.startsWith("auth.aspx"));
    expect(handshakes).toHaveLength(1);
  });

  test("re-handshakes transparently on ERR EXPIRED and retries once", async () => {
    let expiredServed = false;
    const { transport, seen } = scriptedTransport((line) => {
      if (line.startsWith("auth.aspx")) return `OK\n${NONCE}\n${CIPHER}\n`;
      if (!expiredServed) {
        expiredServed = true;
        return "ERR EXPIRED\nmagic expired\n";
      }
      return "OK\n";
    });
    const session = new Session(transport, SETTINGS);
    const reply = await session.request("map.aspx");
    expect(reply.ok).toBe(true);
    expect(seen.filter((line) => line.startsWith("auth.aspx"))).toHaveLength(2);
  });

  test("surfaces a hard auth failure after the retry", async () => {
    const { transport } = scriptedTransport((line) =>
      line.startsWith("auth.aspx") ? `OK\n${NONCE}\n${CIPHER}\n` : "ERR AUTH\nno match\n",
    );
    const session = new Session(transport, SETTINGS);
    await expect(session.request("map.aspx")).rejects.toMatchObject({ code: "AUTH" });
  });

  test("wrong installation code throws BADCODE", async () => {
    const { transport } = scriptedTransport(() => "ERR BADCODE\nunknown code\n");
    const session = new Session(transport, SETTINGS);
    await expect(session.login()).rejects.toSatisfy(
      (exc: unknown) => exc instanceof WireError && exc.code === "BADCODE",
    );
  });

  test("coalesces concurrent fetches of the same page", async () => {
    let served = 0;
    const transport: Transport = async (line) => {
      if (line.startsWith("auth.aspx")) return `OK\n${NONCE}\n${CIPHER}\n`;
      served += 1;
      await new Promise((resolve) => setTimeout(resolve, 5));
      return "OK\npayload\n";
    };
    const session = new Session(transport, SETTINGS);
    await session.request("devices.aspx");
    served = 0;
    const [a, b] = await Promise.all([session.request("map.aspx"), session.request("map.aspx")]);
    expect(served).toBe(1);
    expect(a.lines).toEqual(b.lines);
  });
});

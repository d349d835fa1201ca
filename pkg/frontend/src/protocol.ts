/**
 * The tag bus line protocol, browser side.
 *
 * One frame per socket message, space separated:
 *
 *   REQUEST <tag>
 *   POKE <tag> <value>
 *   ADVISE <tag> / UNADVISE <tag>
 *   DATA <tag> <value> <quality> <timestamp_ms>
 *   ACK <tag>
 *   NAK <tag> <reason>
 *
 * Values: integers bare, reals with a decimal marker, enum values as
 * bare tokens. Booleans ride as 0/1.
 */

export type Quality = "GOOD" | "BAD" | "STALE";
export type TagValue = number | string;

export interface DataFrame {
  verb: "DATA";
  tag: string;
  value: TagValue;
  quality: Quality;
  timestamp: number;
}

export interface AckFrame {
  verb: "ACK";
  tag: string;
}

export interface NakFrame {
  verb: "NAK";
  tag: string;
  reason: string;
}

export type Frame = DataFrame | AckFrame | NakFrame;

const TAG_RE = /^[a-z0-9_]+(\.[a-z0-9_]+)+$/;
const INT_RE = /^[+-]?[0-9]+$/;
const QUALITIES: readonly Quality[] = ["GOOD", "BAD", "STALE"];

export class ProtocolError extends Error {}

export function formatValue(value: TagValue): string {
  if (typeof value === "number") {
    if (!Number.isFinite(value)) {
      throw new ProtocolError(`non-finite value ${value}`);
    }
    if (Number.isInteger(value)) {
      // integers stay bare; the store keeps numeric kinds apart
      return String(value);
    }
    let text = value.toPrecision(9);
    // trim trailing zeros but keep the decimal marker
    if (text.includes(".") && !text.includes("e") && !text.includes("E")) {
      text = text.replace(/0+$/, "").replace(/\.$/, ".0");
    }
    return text;
  }
  if (!/^[A-Za-z_][A-Za-z0-9_.,:+/-]*$/.test(value)) {
    throw new ProtocolError(`enum value ${JSON.stringify(value)} violates the grammar`);
  }
  return value;
}

export function parseValue(token: string): TagValue {
  if (INT_RE.test(token)) return parseInt(token, 10);
  if (/[.eE]/.test(token) || /^[+-]?[0-9]/.test(token)) {
    const num = Number(token);
    if (Number.isFinite(num) && token.trim() !== "" && !Number.isNaN(num)) {
      return num;
    }
  }
  if (/^[A-Za-z_][A-Za-z0-9_.,:+/-]*$/.test(token)) return token;
  throw new ProtocolError(`unparseable value ${JSON.stringify(token)}`);
}

export function encodeRequest(tag: string): string {
  checkTag(tag);
  return `REQUEST ${tag}\n`;
}

export function encodePoke(tag: string, value: TagValue | boolean): string {
  checkTag(tag);
  const v = typeof value === "boolean" ? (value ? 1 : 0) : value;
  return `POKE ${tag} ${formatValue(v)}\n`;
}

export function encodeAdvise(tag: string): string {
  checkTag(tag);
  return `ADVISE ${tag}\n`;
}

export function encodeUnadvise(tag: string): string {
  checkTag(tag);
  return `UNADVISE ${tag}\n`;
}

function checkTag(tag: string): void {
  if (!TAG_RE.test(tag)) {
    throw new ProtocolError(`tag ${JSON.stringify(tag)} violates the grammar`);
  }
}

/** Parse one server frame (DATA, ACK, or NAK). */
export function decodeFrame(line: string): Frame {
  const fields = line.replace(/[\r\n]+$/, "").split(" ");
  if (fields.some((f) => f === "")) {
    throw new ProtocolError("empty field in frame");
  }
  const [verb, tag] = fields;
  switch (verb) {
    case "ACK":
      if (fields.length !== 2) throw new ProtocolError(`ACK arity ${fields.length}`);
      checkTag(tag);
      return { verb: "ACK", tag };
    case "NAK":
      if (fields.length !== 3) throw new ProtocolError(`NAK arity ${fields.length}`);
      if (tag !== "-") checkTag(tag);
      return { verb: "NAK", tag, reason: fields[2] };
    case "DATA": {
      if (fields.length !== 5) throw new ProtocolError(`DATA arity ${fields.length}`);
      checkTag(tag);
      const quality = fields[3] as Quality;
      if (!QUALITIES.includes(quality)) {
        throw new ProtocolError(`unknown quality ${fields[3]}`);
      }
      if (!INT_RE.test(fields[4])) {
        throw new ProtocolError(`bad timestamp ${fields[4]}`);
      }
      return {
        verb: "DATA",
        tag,
        value: parseValue(fields[2]),
        quality,
        timestamp: parseInt(fields[4], 10),
      };
    }
    default:
      throw new ProtocolError(`unexpected verb ${verb}`);
  }
}

/**
 * Hashing, signatures, and the secrets container, over WebCrypto.
 *
 * Ed25519 keys travel as raw 32-byte seeds inside the secrets container and
 * are wrapped in PKCS8 DER for WebCrypto import. Node 20 and current browsers
 * both implement Ed25519 in SubtleCrypto.
 */

import { canonicalBytes, hexToBytes, utf8 } from "./canonical.js";

const subtle: SubtleCrypto = globalThis.crypto.subtle;

export async function sha256(data: Uint8Array): Promise<Uint8Array> {
  const buf = new ArrayBuffer(data.length);
  new Uint8Array(buf).set(data);
  return new Uint8Array(await subtle.digest("SHA-256", buf));
}

// PKCS8 prefix for an Ed25519 private seed (RFC 8410)
const PKCS8_PREFIX = hexToBytes("302e020100300506032b657004220420");

export async function ed25519Sign(seed: Uint8Array, data: Uint8Array): Promise<Uint8Array> {
  const pkcs8 = new Uint8Array(PKCS8_PREFIX.length + seed.length);
  pkcs8.set(PKCS8_PREFIX);
  pkcs8.set(seed, PKCS8_PREFIX.length);
  const key = await subtle.importKey("pkcs8", pkcs8.buffer as ArrayBuffer, { name: "Ed25519" }, false, [
    "sign",
  ]);
  const dataBuf = new ArrayBuffer(data.length);
  new Uint8Array(dataBuf).set(data);
  return new Uint8Array(await subtle.sign("Ed25519", key, dataBuf));
}

export interface VoterSecrets {
  voter: string;
  group: string;
  authSeed: Uint8Array;
  auditSks: (bigint | null)[];
}

interface ContainerDoc {
  kdf: string;
  iterations: number;
  salt: string;
  nonce: string;
  ciphertext: string;
}

/** Open the encrypted-at-rest secrets container written by the voter tools. */
export async function openSecrets(doc: ContainerDoc, passphrase: string): Promise<VoterSecrets> {
  if (doc.kdf !== "pbkdf2-sha256") throw new Error(`unsupported kdf ${doc.kdf}`);
  const material = await subtle.importKey("raw", utf8(passphrase).buffer as ArrayBuffer, "PBKDF2", false, [
    "deriveKey",
  ]);
  const salt = hexToBytes(doc.salt);
  const key = await subtle.deriveKey(
    { name: "PBKDF2", hash: "SHA-256", salt: salt.buffer as ArrayBuffer, iterations: doc.iterations },
    material,
    { name: "AES-GCM", length: 256 },
    false,
    ["decrypt"]
  );
  const nonce = hexToBytes(doc.nonce);
  const ct = hexToBytes(doc.ciphertext);
  let plain: ArrayBuffer;
  try {
    plain = await subtle.decrypt(
      { name: "AES-GCM", iv: nonce.buffer as ArrayBuffer },
      key,
      ct.buffer as ArrayBuffer
    );
  } catch {
    throw new Error("wrong passphrase or corrupted container");
  }
  const payload = JSON.parse(new TextDecoder().decode(plain));
  return {
    voter: payload.voter,
    group: payload.group,
    authSeed: hexToBytes(payload.auth_seed),
    auditSks: payload.audit_sks.map((v: number | null) => (v === null ? null : BigInt(v))),
  };
}

export type Envelope = {
  version: number;
  type: string;
  payload: Record<string, unknown>;
  signatures: Record<string, string>;
};

export async function signEnvelope(
  etype: string,
  payload: Record<string, unknown>,
  signer: string,
  seed: Uint8Array
): Promise<Envelope> {
  const env: Envelope = { version: 1, type: etype, payload, signatures: {} };
  const data = canonicalBytes({
    payload: payload as never,
    type: etype,
    version: 1,
  });
  const sig = await ed25519Sign(seed, data);
  env.signatures[signer] = Array.from(sig)
    .map((b) => b.toString(16).padStart(2, "0"))
    .join("");
  return env;
}

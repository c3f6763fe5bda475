/**
 * The same Schnorr groups the board uses, with BigInt arithmetic and the
 * fixed-width big-endian encodings shared across the protocol.
 */

import { bytesToHex, hexToBytes } from "./canonical.js";

export interface GroupParams {
  name: string;
  p: bigint;
  q: bigint;
  g: bigint;
  elemLen: number;
  scalarLen: number;
}

const PROD_P = BigInt(
  "0x" +
    "b2cdf0dc72dd2d6791d153fc6363b9227a8d543e5a26f871c851302b1e13549279514af7" +
    "fd0f4a44903a0d22c0a79d3940ae3c48e1e1656b6f20df3085d178b2d16ed59b9164469b" +
    "e4e8d6624ea643e1ddfc552268605813b654daff1dcd8370292fb02816bf8d5870c8c83a" +
    "d885d88b84bf93fa37814a23e2f7077c88cfa356ed485ccc4dd13a89a7c02e88ea016ad6" +
    "b904e4aa0b36df9e8a6f6ccc37b6589d9ec8e9523d01943e3726a2f472c1bfc8f3772129" +
    "70ccd89956ea57aeb9be4a0bfde2fe6b43d635093379f8df1be55bb2e75e42caac0b4bb4" +
    "1faf16da5ecfe7d9e83d81f7d09d037fbfd3e49357906f98c9c90c06012abd9696331de8" +
    "47ccf3a5"
);
const PROD_Q = BigInt("0xa3b8c1e9392456de3eb13b9046685257bdd640fb06671ad11c80317fa3b179af");
const PROD_G = BigInt(
  "0x" +
    "68fe085fb9298c8a914633a6b1e3ac9ed1f6c1f5be984e2c7cc2c3af8fa98dff0a6e4c80" +
    "f1bfbf0e25a3820b77f9d68059e1a3e1a3b4354675a47c5abac4097fe66e86c2ebcb901c" +
    "664ef215072f8de04137f7f92bf189d858bf775bbff81301c5298aa1c98a789c6b0a0a20" +
    "4737511fbc2dc8e0d9eb933c651b69600e7ca6923e4daf10fb24c86b3195090cb459bd86" +
    "25f9f8e211a0a8797653e27d3e848810e507b5f6785208915be746d4a9bae3b6807579b1" +
    "aee110bf04f627d719853f90f566e90370eb3f0b6c255fbcff6eb1a2dd35c001de335eb8" +
    "a2e6ef66de453d9ae2ef48f30c701302088d72cf81a9755ff3f10a7cd80fcd151658eab5" +
    "6fc15b25"
);

export const GROUPS: Record<string, GroupParams> = {
  p23: { name: "p23", p: 23n, q: 11n, g: 2n, elemLen: 1, scalarLen: 1 },
  sim64: {
    name: "sim64",
    p: 17330168547826957517n,
    q: 264034501612331n,
    g: 16003717263223994400n,
    elemLen: 8,
    scalarLen: 6,
  },
  prod2048: { name: "prod2048", p: PROD_P, q: PROD_Q, g: PROD_G, elemLen: 256, scalarLen: 32 },
};

export function getGroup(name: string): GroupParams {
  const group = GROUPS[name];
  if (!group) throw new Error(`unknown group ${name}`);
  return group;
}

export function modPow(base: bigint, exp: bigint, mod: bigint): bigint {
  let result = 1n;
  let b = ((base % mod) + mod) % mod;
  let e = exp;
  while (e > 0n) {
    if (e & 1n) result = (result * b) % mod;
    b = (b * b) % mod;
    e >>= 1n;
  }
  return result;
}

export function modInv(value: bigint, mod: bigint): bigint {
  // extended Euclid; mod is prime here
  let [old_r, r] = [((value % mod) + mod) % mod, mod];
  let [old_s, s] = [1n, 0n];
  while (r !== 0n) {
    const q = old_r / r;
    [old_r, r] = [r, old_r - q * r];
    [old_s, s] = [s, old_s - q * s];
  }
  return ((old_s % mod) + mod) % mod;
}

export function isElement(group: GroupParams, e: bigint): boolean {
  if (e <= 0n || e >= group.p) return false;
  return modPow(e, group.q, group.p) === 1n;
}

export function bigintToBytes(value: bigint, length: number): Uint8Array {
  const out = new Uint8Array(length);
  let v = value;
  for (let i = length - 1; i >= 0; i--) {
    out[i] = Number(v & 0xffn);
    v >>= 8n;
  }
  if (v !== 0n) throw new Error("integer too large for encoding");
  return out;
}

export function bytesToBigint(data: Uint8Array): bigint {
  let v = 0n;
  for (const b of data) v = (v << 8n) | BigInt(b);
  return v;
}

export function elemHex(group: GroupParams, e: bigint): string {
  return bytesToHex(bigintToBytes(e, group.elemLen));
}

export function elemFromHex(group: GroupParams, text: string): bigint {
  const e = bytesToBigint(hexToBytes(text, group.elemLen));
  if (!isElement(group, e)) throw new Error("not a canonical group element");
  return e;
}

export function scalarBytes(group: GroupParams, s: bigint): Uint8Array {
  if (s < 0n || s >= group.q) throw new Error("scalar out of range");
  return bigintToBytes(s, group.scalarLen);
}

export function randScalar(group: GroupParams): bigint {
  // rejection sampling over whole bytes keeps the distribution uniform
  const bytes = new Uint8Array(group.scalarLen + 8);
  for (;;) {
    crypto.getRandomValues(bytes);
    const v = bytesToBigint(bytes) % (1n << BigInt(8 * group.scalarLen));
    if (v < group.q) return v;
  }
}

export interface Ciphertext {
  a: bigint;
  b: bigint;
}

export function encrypt(group: GroupParams, pk: bigint, m: bigint, r: bigint): Ciphertext {
  return {
    a: modPow(group.g, r, group.p),
    b: (modPow(group.g, m, group.p) * modPow(pk, r, group.p)) % group.p,
  };
}

export function rerand(group: GroupParams, pk: bigint, c: Ciphertext, r: bigint): Ciphertext {
  return {
    a: (c.a * modPow(group.g, r, group.p)) % group.p,
    b: (c.b * modPow(pk, r, group.p)) % group.p,
  };
}

/** Decrypt with a small plaintext bound; null when out of range. */
export function decrypt(
  group: GroupParams,
  sk: bigint,
  c: Ciphertext,
  bound: number
): number | null {
  const residue = (c.b * modInv(modPow(c.a, sk, group.p), group.p)) % group.p;
  let acc = 1n;
  for (let m = 0; m <= bound; m++) {
    if (acc === residue) return m;
    acc = (acc * group.g) % group.p;
  }
  return null;
}

export function ctFromDoc(group: GroupParams, doc: { a: string; b: string }): Ciphertext {
  return { a: elemFromHex(group, doc.a), b: elemFromHex(group, doc.b) };
}

export function ctToDoc(group: GroupParams, c: Ciphertext): { a: string; b: string } {
  return { a: elemHex(group, c.a), b: elemHex(group, c.b) };
}

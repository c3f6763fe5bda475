/**
 * The ballot-entry sigma protocols, matching the board's transcripts bit for
 * bit: a conjunctive encryption-pair proof for initial entries and the
 * disjunctive sign-or-carry proof for transitions, with one carry branch per
 * registered audit-key epoch.
 */

import { bytesToHex, hexToBytes, packFields, u64, utf8 } from "./canonical.js";
import {
  Ciphertext,
  GroupParams,
  bigintToBytes,
  bytesToBigint,
  encrypt,
  modInv,
  modPow,
  randScalar,
  rerand,
} from "./groups.js";
import { sha256 } from "./crypto.js";

const DOMAIN_ENC_PAIR = utf8("ecollect/encpair/v1");
const DOMAIN_TRANSITION = utf8("ecollect/transition/v1");

export interface ProofContext {
  collection: string;
  voter: string;
  index: number;
  prevDigest: string;
  boundDigest: string;
}

function ctxFields(ctx: ProofContext): Uint8Array[] {
  return [
    utf8(ctx.collection),
    utf8(ctx.voter),
    u64(ctx.index),
    hexToBytes(ctx.prevDigest, 32),
    hexToBytes(ctx.boundDigest, 32),
  ];
}

async function challenge(
  group: GroupParams,
  domain: Uint8Array,
  fields: Uint8Array[]
): Promise<bigint> {
  const digest = await sha256(packFields([domain, utf8(group.name), ...fields]));
  return bytesToBigint(digest) % group.q;
}

const elem = (group: GroupParams, e: bigint) => bigintToBytes(e, group.elemLen);

// ---------------------------------------------------------------------------
// encryption-pair proof (verification only; the board creates these)

export interface EncPairProof {
  challenge: bigint;
  t: [bigint, bigint, bigint, bigint];
  zT: bigint;
  zV: bigint;
}

export function encPairFromHex(group: GroupParams, text: string): EncPairProof {
  const fields = unpack(text);
  if (fields.length !== 8 || new TextDecoder().decode(fields[0]) !== "EP1")
    throw new Error("bad encryption-pair proof encoding");
  return {
    challenge: bytesToBigint(fields[1]),
    t: [
      bytesToBigint(fields[2]),
      bytesToBigint(fields[3]),
      bytesToBigint(fields[4]),
      bytesToBigint(fields[5]),
    ],
    zT: bytesToBigint(fields[6]),
    zV: bytesToBigint(fields[7]),
  };
}

export async function verifyEncPair(
  group: GroupParams,
  pkT: bigint,
  pkV: bigint,
  m: bigint,
  ct: Ciphertext,
  cv: Ciphertext,
  proof: EncPairProof,
  ctx: ProofContext
): Promise<boolean> {
  const p = group.p;
  const gInvM = modInv(modPow(group.g, m, p), p);
  const targets = [ct.a, (ct.b * gInvM) % p, cv.a, (cv.b * gInvM) % p];
  const bases = [group.g, pkT, group.g, pkV];
  const zs = [proof.zT, proof.zT, proof.zV, proof.zV];
  for (let i = 0; i < 4; i++) {
    const lhs = modPow(bases[i], zs[i], p);
    const rhs = (proof.t[i] * modPow(targets[i], proof.challenge, p)) % p;
    if (lhs !== rhs) return false;
  }
  const fields = [
    elem(group, pkT),
    elem(group, pkV),
    u64(Number(m)),
    elem(group, ct.a),
    elem(group, ct.b),
    elem(group, cv.a),
    elem(group, cv.b),
    ...ctxFields(ctx),
    ...proof.t.map((x) => elem(group, x)),
  ];
  return proof.challenge === (await challenge(group, DOMAIN_ENC_PAIR, fields));
}

// ---------------------------------------------------------------------------
// disjunctive transition proof

export interface BranchProof {
  challenge: bigint;
  t: [bigint, bigint, bigint, bigint];
  zT: bigint;
  zV: bigint;
}

export interface TransitionStatement {
  pkT: bigint;
  pkVHistory: bigint[];
  prevCt: Ciphertext;
  prevCv: Ciphertext;
  nextCt: Ciphertext;
  nextCv: Ciphertext;
}

function branchBasesTargets(
  group: GroupParams,
  stmt: TransitionStatement,
  branch: number
): { bases: bigint[]; targets: bigint[] } {
  const p = group.p;
  if (branch === 0) {
    const pkV = stmt.pkVHistory[stmt.pkVHistory.length - 1];
    const gInv = modInv(group.g, p);
    return {
      bases: [group.g, stmt.pkT, group.g, pkV],
      targets: [
        stmt.nextCt.a,
        (stmt.nextCt.b * gInv) % p,
        stmt.nextCv.a,
        (stmt.nextCv.b * gInv) % p,
      ],
    };
  }
  const pkV = stmt.pkVHistory[branch - 1];
  return {
    bases: [group.g, stmt.pkT, group.g, pkV],
    targets: [
      (stmt.nextCt.a * modInv(stmt.prevCt.a, p)) % p,
      (stmt.nextCt.b * modInv(stmt.prevCt.b, p)) % p,
      (stmt.nextCv.a * modInv(stmt.prevCv.a, p)) % p,
      (stmt.nextCv.b * modInv(stmt.prevCv.b, p)) % p,
    ],
  };
}

function transcriptFields(
  group: GroupParams,
  stmt: TransitionStatement,
  ctx: ProofContext
): Uint8Array[] {
  return [
    elem(group, stmt.pkT),
    u64(stmt.pkVHistory.length),
    ...stmt.pkVHistory.map((pk) => elem(group, pk)),
    elem(group, stmt.prevCt.a),
    elem(group, stmt.prevCt.b),
    elem(group, stmt.prevCv.a),
    elem(group, stmt.prevCv.b),
    elem(group, stmt.nextCt.a),
    elem(group, stmt.nextCt.b),
    elem(group, stmt.nextCv.a),
    elem(group, stmt.nextCv.b),
    ...ctxFields(ctx),
  ];
}

async function transitionChallenge(
  group: GroupParams,
  stmt: TransitionStatement,
  ctx: ProofContext,
  branches: BranchProof[]
): Promise<bigint> {
  const fields = transcriptFields(group, stmt, ctx);
  for (const br of branches) for (const t of br.t) fields.push(elem(group, t));
  return challenge(group, DOMAIN_TRANSITION, fields);
}

function simulatedBranch(
  group: GroupParams,
  stmt: TransitionStatement,
  branch: number
): BranchProof {
  const { bases, targets } = branchBasesTargets(group, stmt, branch);
  const p = group.p;
  const c = randScalar(group);
  const zT = randScalar(group);
  const zV = randScalar(group);
  const zs = [zT, zT, zV, zV];
  const t = bases.map(
    (base, i) => (modPow(base, zs[i], p) * modInv(modPow(targets[i], c, p), p)) % p
  ) as [bigint, bigint, bigint, bigint];
  return { challenge: c, t, zT, zV };
}

export async function proveTransition(
  group: GroupParams,
  stmt: TransitionStatement,
  branch: "sign" | "carry",
  witness: [bigint, bigint],
  ctx: ProofContext,
  carryEpoch?: number
): Promise<BranchProof[]> {
  const [rT, rV] = witness;
  let real: number;
  if (branch === "sign") {
    real = 0;
    const pkV = stmt.pkVHistory[stmt.pkVHistory.length - 1];
    const ect = encrypt(group, stmt.pkT, 1n, rT);
    const ecv = encrypt(group, pkV, 1n, rV);
    if (ect.a !== stmt.nextCt.a || ect.b !== stmt.nextCt.b || ecv.a !== stmt.nextCv.a || ecv.b !== stmt.nextCv.b)
      throw new Error("witness inconsistent with declared branch");
  } else {
    const epoch = carryEpoch ?? stmt.pkVHistory.length - 1;
    real = 1 + epoch;
    const ect = rerand(group, stmt.pkT, stmt.prevCt, rT);
    const ecv = rerand(group, stmt.pkVHistory[epoch], stmt.prevCv, rV);
    if (ect.a !== stmt.nextCt.a || ect.b !== stmt.nextCt.b || ecv.a !== stmt.nextCv.a || ecv.b !== stmt.nextCv.b)
      throw new Error("witness inconsistent with declared branch");
  }
  const count = 1 + stmt.pkVHistory.length;
  const branches: (BranchProof | null)[] = [];
  for (let i = 0; i < count; i++) branches.push(i === real ? null : simulatedBranch(group, stmt, i));
  const { bases } = branchBasesTargets(group, stmt, real);
  const wT = randScalar(group);
  const wV = randScalar(group);
  const p = group.p;
  const tReal: [bigint, bigint, bigint, bigint] = [
    modPow(bases[0], wT, p),
    modPow(bases[1], wT, p),
    modPow(bases[2], wV, p),
    modPow(bases[3], wV, p),
  ];
  branches[real] = { challenge: 0n, t: tReal, zT: 0n, zV: 0n };
  const global = await transitionChallenge(group, stmt, ctx, branches as BranchProof[]);
  let others = 0n;
  for (let i = 0; i < count; i++) if (i !== real) others += branches[i]!.challenge;
  const cReal = (((global - others) % group.q) + group.q) % group.q;
  branches[real] = {
    challenge: cReal,
    t: tReal,
    zT: (wT + cReal * rT) % group.q,
    zV: (wV + cReal * rV) % group.q,
  };
  return branches as BranchProof[];
}

export async function verifyTransition(
  group: GroupParams,
  stmt: TransitionStatement,
  branches: BranchProof[],
  ctx: ProofContext
): Promise<boolean> {
  if (branches.length !== 1 + stmt.pkVHistory.length) return false;
  const p = group.p;
  for (let i = 0; i < branches.length; i++) {
    const br = branches[i];
    const { bases, targets } = branchBasesTargets(group, stmt, i);
    const zs = [br.zT, br.zT, br.zV, br.zV];
    for (let j = 0; j < 4; j++) {
      const lhs = modPow(bases[j], zs[j], p);
      const rhs = (br.t[j] * modPow(targets[j], br.challenge, p)) % p;
      if (lhs !== rhs) return false;
    }
  }
  const global = await transitionChallenge(group, stmt, ctx, branches);
  let sum = 0n;
  for (const br of branches) sum += br.challenge;
  return sum % group.q === global % group.q;
}

// ---------------------------------------------------------------------------
// serialization (length-prefixed field list, hex-wrapped)

function unpack(text: string): Uint8Array[] {
  const data = hexToBytes(text);
  const fields: Uint8Array[] = [];
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  let offset = 0;
  while (offset < data.length) {
    if (offset + 4 > data.length) throw new Error("truncated field length");
    const len = view.getUint32(offset, false);
    offset += 4;
    if (offset + len > data.length) throw new Error("truncated field body");
    fields.push(data.slice(offset, offset + len));
    offset += len;
  }
  return fields;
}

export function transitionToHex(group: GroupParams, branches: BranchProof[]): string {
  const fields: Uint8Array[] = [utf8("TR1")];
  for (const br of branches) {
    fields.push(bigintToBytes(br.challenge, group.scalarLen));
    for (const t of br.t) fields.push(elem(group, t));
    fields.push(bigintToBytes(br.zT, group.scalarLen));
    fields.push(bigintToBytes(br.zV, group.scalarLen));
  }
  return bytesToHex(packFields(fields));
}

export function transitionFromHex(group: GroupParams, text: string): BranchProof[] {
  const fields = unpack(text);
  if (
    fields.length < 8 ||
    new TextDecoder().decode(fields[0]) !== "TR1" ||
    (fields.length - 1) % 7 !== 0
  )
    throw new Error("bad transition proof encoding");
  const branches: BranchProof[] = [];
  for (let i = 1; i < fields.length; i += 7) {
    branches.push({
      challenge: bytesToBigint(fields[i]),
      t: [
        bytesToBigint(fields[i + 1]),
        bytesToBigint(fields[i + 2]),
        bytesToBigint(fields[i + 3]),
        bytesToBigint(fields[i + 4]),
      ],
      zT: bytesToBigint(fields[i + 5]),
      zV: bytesToBigint(fields[i + 6]),
    });
  }
  return branches;
}

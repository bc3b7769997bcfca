"""Command-line entry point.

Exit codes: 0 success, 1 domain error (error class name on stderr),
2 usage error. Keys and ciphertexts are read and written as JSON envelopes.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from . import bench, envelope, indcpa, scheme, sites
from .errors import BackendMismatch, XdpreError
from .groups import get_backend
from .policy import build_matrix, parse_policy


def _rng(args) -> random.Random:
    return random.Random(args.seed) if args.seed is not None else random.SystemRandom()


def _backend(args, default: str = "debug"):
    return get_backend(args.backend or default)


def _load(args, path, expect):
    obj, payload = envelope.load(path, expect)
    if args.backend is not None and get_backend(args.backend) != obj.backend:
        raise BackendMismatch(f"{path} uses {obj.backend.name}, --backend asked for {args.backend}")
    return obj, payload


def _attrs(text: str) -> list[str]:
    return [a.strip() for a in text.split(",") if a.strip()]


def _write(path, data: bytes) -> None:
    Path(path).write_bytes(data)


# ---------------------------------------------------------------------------
# commands


def cmd_setup(args):
    msk, pk = scheme.setup(_attrs(args.attrs), _rng(args), _backend(args))
    envelope.save(args.out_pk, pk)
    envelope.save(args.out_msk, msk)


def cmd_keygen(args):
    pk, _ = _load(args, args.pk, "pk")
    msk, _ = _load(args, args.msk, "msk")
    attrs = _attrs(args.attrs)
    if args.cross_domain:
        key = scheme.issue_crossdomain_key(pk.backend, msk.beta, attrs)
    else:
        key = scheme.keygen(msk, pk, attrs, _rng(args), retain=args.retain_secrets)
    envelope.save(args.out, key)


def cmd_encrypt(args):
    pk, _ = _load(args, args.pk, "pk")
    tree = parse_policy(args.policy)
    if args.print_matrix:
        sys.stdout.write(build_matrix(tree).dump())
        return
    rng = _rng(args)
    K = scheme.random_symmetric_key(pk.backend, rng)
    ct = scheme.encrypt(pk, tree, K, rng)
    sealed = scheme.dem_seal(scheme.kdf(K), Path(args.infile).read_bytes())
    envelope.save(args.out, ct, payload=sealed)


def cmd_decrypt(args):
    pk, _ = _load(args, args.pk, "pk")
    usk, _ = _load(args, args.key, "usk")
    ct, sealed = _load(args, args.ct, "ct")
    K = scheme.decrypt(pk, usk, ct)
    _write(args.out, scheme.dem_open(scheme.kdf(K), sealed or b""))


def cmd_rekeygen(args):
    pk, _ = _load(args, args.pk, "pk")
    usk, _ = _load(args, args.key, "usk")
    target, _ = _load(args, args.target_pk, "pk")
    rk = scheme.rekeygen_paper(usk, target.authority_pk, pk, _rng(args))
    envelope.save(args.out, rk)


def cmd_reencrypt(args):
    pk, _ = _load(args, args.pk, "pk")
    ct, sealed = _load(args, args.ct, "ct")
    tree = parse_policy(args.policy)
    rng = _rng(args)
    if args.mode == scheme.MODE_CORRECTED:
        msk, _ = _load(args, args.msk, "msk")
        target, _ = _load(args, args.target_pk, "pk")
        rct = scheme.reencrypt_corrected(msk, pk, target.authority_pk, ct, tree, rng)
    else:
        rk, _ = _load(args, args.rk, "rk")
        rct = scheme.reencrypt_paper(pk, rk, ct, tree, rng)
    envelope.save(args.out, rct, payload=sealed)


def cmd_decrypt_re(args):
    cdk, _ = _load(args, args.key, "cdk")
    rct, sealed = _load(args, args.ct, "rct")
    K = scheme.decrypt_reencrypted(cdk, rct)
    _write(args.out, scheme.dem_open(scheme.kdf(K), sealed or b""))


def cmd_game(args):
    m0, m1 = args.m0.encode(), args.m1.encode()
    if args.pad:
        m0, m1 = indcpa.equal_length_pair(m0, m1)
    config = indcpa.GameConfig(
        trials=args.trials,
        policy=args.policy,
        m0=m0,
        m1=m1,
        strategy=args.strategy,
        seed=args.seed if args.seed is not None else random.SystemRandom().getrandbits(32),
        backend=_backend(args),
    )
    out = json.dumps(indcpa.run_game(config).to_json()) + "\n"
    if args.out:
        Path(args.out).write_text(out)
    else:
        sys.stdout.write(out)


def cmd_bench(args):
    config = bench.BenchConfig(
        trial_counts=tuple(int(x) for x in args.trials.split(",")),
        samples=args.samples,
        seed=args.seed if args.seed is not None else 0,
        backend=_backend(args),
    )
    table = bench.emit_table(bench.run_suite(config), args.format)
    if args.out:
        _write(args.out, table)
    else:
        sys.stdout.write(table.decode())


def cmd_demo(args):
    result = sites.run_demo(args.seed if args.seed is not None else 0, _backend(args), args.log)
    summary = {
        "task": result.task.id,
        "task_state": result.task.state,
        "issue": result.issue.id,
        "issue_state": result.issue.state,
        "payload_recovered": result.opened_payload == sites.DEMO_PAYLOAD,
        "violations": result.report.violations,
        "events": len(result.sim.log.events),
    }
    sys.stdout.write(json.dumps(summary) + "\n")


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--backend", default=None,
                        help="debug, debug-<prime>, curve (BLS12-381); defaults to the input file's backend or debug")
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default: OS entropy)")

    p = argparse.ArgumentParser(prog="xdpre", description="Cross-domain attribute-based proxy re-encryption")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("setup", parents=[common], help="generate a domain's master and public keys")
    s.add_argument("--attrs", required=True, help="comma-separated attribute universe")
    s.add_argument("--out-pk", required=True)
    s.add_argument("--out-msk", required=True)
    s.set_defaults(func=cmd_setup)

    s = sub.add_parser("keygen", parents=[common], help="issue a user key")
    s.add_argument("--pk", required=True)
    s.add_argument("--msk", required=True)
    s.add_argument("--attrs", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--retain-secrets", action="store_true", help="keep k, kb, k_i (needed by rekeygen)")
    s.add_argument("--cross-domain", action="store_true", help="issue a cross-domain (requester) key instead")
    s.set_defaults(func=cmd_keygen)

    s = sub.add_parser("encrypt", parents=[common], help="seal a payload under an access policy")
    s.add_argument("--pk", required=True)
    s.add_argument("--policy", required=True)
    s.add_argument("--in", dest="infile")
    s.add_argument("--out")
    s.add_argument("--print-matrix", action="store_true", help="print the compiled access matrix and exit")
    s.set_defaults(func=cmd_encrypt)

    s = sub.add_parser("decrypt", parents=[common], help="open a same-domain ciphertext")
    s.add_argument("--pk", required=True)
    s.add_argument("--key", required=True)
    s.add_argument("--ct", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_decrypt)

    s = sub.add_parser("rekeygen", parents=[common], help="build a re-encryption key")
    s.add_argument("--pk", required=True, help="data owner's domain public key")
    s.add_argument("--key", required=True, help="data owner's key with retained secrets")
    s.add_argument("--target-pk", required=True, help="requester domain public key")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rekeygen)

    s = sub.add_parser("reencrypt", parents=[common], help="re-encrypt towards another domain")
    s.add_argument("--pk", required=True)
    s.add_argument("--ct", required=True)
    s.add_argument("--policy", required=True, help="requester-side policy")
    s.add_argument("--out", required=True)
    s.add_argument("--mode", choices=[scheme.MODE_CORRECTED, scheme.MODE_PAPER], default=scheme.MODE_CORRECTED)
    s.add_argument("--msk")
    s.add_argument("--target-pk")
    s.add_argument("--rk")
    s.set_defaults(func=cmd_reencrypt)

    s = sub.add_parser("decrypt-re", parents=[common], help="open a re-encrypted ciphertext")
    s.add_argument("--key", required=True, help="cross-domain key")
    s.add_argument("--ct", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_decrypt_re)

    s = sub.add_parser("game", parents=[common], help="run the IND-CPA game")
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--policy", default=bench.policy_for(bench.A1))
    s.add_argument("--m0", default=bench.MESSAGES[0])
    s.add_argument("--m1", default=bench.MESSAGES[1])
    s.add_argument("--no-pad", dest="pad", action="store_false",
                   help="do not pad the shorter message with spaces")
    s.add_argument("--strategy", choices=sorted(indcpa.STRATEGIES), default="random-guess")
    s.add_argument("--out")
    s.set_defaults(func=cmd_game)

    s = sub.add_parser("bench", parents=[common], help="timed game suite over attribute sets and messages")
    s.add_argument("--samples", type=int, default=10)
    s.add_argument("--trials", default="1000,1500,2000")
    s.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    s.add_argument("--out")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("demo", parents=[common], help="scripted simulations")
    s.add_argument("scenario", choices=["sites"])
    s.add_argument("--log", help="write the JSON-lines event log here")
    s.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "encrypt" and not args.print_matrix and not (args.infile and args.out):
        parser.error("encrypt needs --in and --out unless --print-matrix is given")
    if args.command == "reencrypt":
        if args.mode == scheme.MODE_CORRECTED and not (args.msk and args.target_pk):
            parser.error("--mode corrected needs --msk and --target-pk")
        if args.mode == scheme.MODE_PAPER and not args.rk:
            parser.error("--mode paper needs --rk")
    try:
        if args.backend is not None:
            get_backend(args.backend)
    except ValueError as exc:
        parser.error(str(exc))
    try:
        args.func(args)
    except XdpreError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


dispatch = main

if __name__ == "__main__":
    sys.exit(main())

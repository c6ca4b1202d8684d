"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line; the lines are printed in the
pytest terminal summary (see ``conftest.py``).
"""

import contextlib
import random
import time

from jigsaw.bitblock import Block, inverse_odd, mul_mod, random_source, xor_block
from jigsaw.codec import DecodeSession, EncodeSession, decode_group, iter_encode_message
from jigsaw.costmodel import (
    aes_xor_count,
    emit_curves,
    instrumented_counts,
    analytic_mul_count,
    analytic_xor_count,
)
from jigsaw.errors import AuthFailure, JigsawError, MalformedPacket
from jigsaw.framing import BitString, embed, extract, frame
from jigsaw.keystate import generate
from jigsaw.transport import AdversarialChannel, ChannelFault, Sender, loopback_transfer, send_stream
from jigsaw.wire import FLAG_R, packet_size, peek_header, seal, verify_and_parse

RESULTS = []


@contextlib.contextmanager
def criterion(number, title, budget=None):
    start = time.perf_counter()
    detail = {}
    try:
        yield detail
        elapsed = time.perf_counter() - start
        if budget is not None:
            assert elapsed < budget, f"took {elapsed:.2f}s, budget {budget}s"
    except BaseException as exc:
        RESULTS.append(f"FAIL  {number}. {title}: {exc}")
        raise
    extra = " ".join(f"{k}={v}" for k, v in detail.items())
    RESULTS.append(f"PASS  {number}. {title} ({elapsed:.2f}s) {extra}".rstrip())


def test_1_golden_vector():
    with criterion(1, "worked framing example"):
        key = Block.from_str("11000110")
        masked = xor_block(embed(frame(BitString.from_str("01101")), 1, 8), key)
        assert str(masked) == "10011101"
        assert str(extract(xor_block(masked, key))) == "01101"


def test_2_otp_permutation():
    with criterion(2, "masking is a permutation over all 8-bit keys", budget=1.0) as d:
        for c in range(256):
            values = sorted(xor_block(Block(c, 8), Block(p, 8)).value for p in range(256))
            assert values == list(range(256))
        d["ciphertexts"] = 256


def test_3_cost_model():
    with criterion(3, "published operation counts"):
        assert analytic_xor_count(10, 7) == 16
        assert analytic_xor_count(20, 7) == 32
        assert analytic_mul_count(10, 7) == 1
        assert analytic_mul_count(20, 7) == 2
        assert aes_xor_count(10) == 110
        muls = [row.mul for row in emit_curves(range(2, 11), [10])]
        assert muls == [10 // k for k in range(2, 11)]
        assert all(a >= b for a, b in zip(muls, muls[1:]))


def test_4_roundtrip_property():
    combos = [(ps, k, l_min)
              for ps in (64, 1024, 4096)
              for k in (2, 7, 16)
              for l_min in (1, ps // 2, ps - 2)]
    rng = random.Random(2024)
    with criterion(4, "1000 random messages round-trip with keys in lockstep", budget=60.0) as d:
        sessions = {}
        for i, combo in enumerate(combos):
            ps, k, l_min = combo
            key = generate(random_source(i), k, ps)
            sessions[combo] = (EncodeSession(key, random_source(10_000 + i), l_min),
                               DecodeSession(key))
        groups = 0
        for i in range(1000):
            combo = combos[i % len(combos)]
            enc, dec = sessions[combo]
            if i < 2:
                length = (0, 100_000)[i]
            else:
                length = rng.randint(0, 100_000)
            data = BitString(rng.getrandbits(length), length) if length else BitString.empty()
            parts = []
            for ct in iter_encode_message(enc, data):
                parts += decode_group(dec, ct)
                assert dec.key == enc.key
                groups += 1
            assert BitString.join(parts) == data
        d["groups"] = groups


def test_5_authentication():
    rng = random.Random(5)
    with criterion(5, "single-bit mutations never verify", budget=30.0) as d:
        mac_key = rng.randbytes(32)

        class S:
            pass

        s = S()
        s.key = S()
        s.key.mac_key = mac_key
        accepted = trials = 0
        for ps in (64, 1024):
            for _ in range(5000):
                s.next_seq = rng.getrandbits(64)
                block = Block(rng.getrandbits(ps), ps)
                _, raw = seal(s, block, rng.choice([0, FLAG_R, FLAG_R | 0x02]))
                # header (magic, version, flags, seq) and payload bits
                bit = rng.randrange((len(raw) - 16) * 8)
                mutated = bytearray(raw)
                mutated[bit // 8] ^= 0x80 >> (bit % 8)
                trials += 1
                try:
                    verify_and_parse(mac_key, bytes(mutated), ps)
                    accepted += 1
                except (AuthFailure, MalformedPacket):
                    pass
        assert trials >= 10_000
        assert accepted == 0
        d["mutations"] = trials
        d["accepted"] = accepted


def test_6_adversarial_channel():
    data_rng = random.Random(6)
    with criterion(6, "reorder/duplicate recover exactly; dropped R always detected",
                   budget=60.0) as d:
        key = generate(random_source(60), 3, 64)
        recovered = 0
        for trial in range(300):
            frng = random.Random(trial)
            faults = [ChannelFault("reorder", arg=frng.randint(1, 8), seed=trial)]
            for _ in range(frng.randint(0, 4)):
                faults.append(ChannelFault("duplicate", target_seq=frng.randrange(60), seed=trial))
            if frng.random() < 0.5:
                faults.append(ChannelFault("reorder", target_seq=frng.randrange(60),
                                           arg=frng.randint(1, 8), seed=trial))
            frng.shuffle(faults)
            msgs = [data_rng.randbytes(data_rng.randint(0, 400)) for _ in range(2)]
            res = loopback_transfer(msgs, key, AdversarialChannel(faults),
                                    rng=random_source(trial), l_min=8, concurrent=False)
            assert res.outcome == "recovered", (trial, faults, res.error)
            recovered += 1

        detected = 0
        for trial in range(1000):
            msgs = [data_rng.randbytes(data_rng.randint(1, 400))]
            seed = 5000 + trial
            r_seqs = _r_seqs(msgs, key, seed)
            target = random.Random(trial).choice(r_seqs)
            faults = [ChannelFault("drop", target_seq=target, seed=trial)]
            if trial % 2:
                faults.append(ChannelFault("reorder", arg=1 + trial % 8, seed=trial))
                faults.append(ChannelFault("duplicate", target_seq=trial % 5, seed=trial))
            res = loopback_transfer(msgs, key, AdversarialChannel(faults),
                                    rng=random_source(seed), l_min=8, concurrent=False)
            assert res.outcome == "failed-detected", (trial, res.outcome)
            assert isinstance(res.error, JigsawError)
            detected += 1
        d["recovered"] = f"{recovered}/300"
        d["detected"] = f"{detected}/1000"


def _r_seqs(msgs, key, seed):
    """Sequence numbers of R-flagged packets for a seeded run (senders are deterministic)."""
    sender = Sender(key, random_source(seed), l_min=8)
    raws = [raw for m in msgs for raw in sender.packets(m)]
    return [peek_header(r)[1] for r in raws if peek_header(r)[0] & FLAG_R]


def test_7_mul_mod_bijective():
    with criterion(7, "odd multipliers are bijections; inverses match search", budget=1.0) as d:
        checks = 0
        for r in range(1, 256, 2):
            images = set()
            for x in range(256):
                images.add(mul_mod(Block(x, 8), Block(r, 8)).value)
                checks += 1
            assert len(images) == 256
            inverse = [s for s in range(256) if (r * s) % 256 == 1]
            assert [inverse_odd(Block(r, 8)).value] == inverse
        d["checks"] = checks


def test_8_end_to_end_loopback(receiver_thread):
    data = random.Random(8).randbytes(1 << 20)
    key = generate(random_source(80), 7, 1024)
    with criterion(8, "1 MiB over local sockets with defaults", budget=10.0) as d:
        rt = receiver_thread(key)
        sent = send_stream(rt.address, key, data, l_min=512, seed=81)
        rt.join()
        assert rt.error is None, rt.error
        assert rt.messages == [data]
        ops = instrumented_counts(sent)
        assert instrumented_counts(rt.report) == ops
        assert sent.wire_bytes == sent.packets * packet_size(1024)
        d["parts"] = ops.n_parts
        d["groups"] = ops.groups
        d["xor_measured"] = ops.xor_blocks
        d["xor_analytic"] = sent.analytic_xor
        d["mul_measured"] = ops.mul_blocks
        d["mul_analytic"] = sent.analytic_mul

import io
import random

import pytest

from jigsaw.bitblock import Block, inverse_odd, mul_mod, random_block, random_source, xor_block
from jigsaw.errors import KeyFileError, NotInvertibleError, WidthError
from jigsaw.keystate import (
    KeyState,
    generate,
    inverse_transform,
    key_file_size,
    load_key,
    read_key_file,
    save_key,
    transform,
    write_key_file,
)

MAC = bytes(range(32))


def state(values, ps=8, generation=0):
    return KeyState(tuple(Block(v, ps) for v in values), MAC, generation)


def two_adic_valuation(x):
    return (x & -x).bit_length() - 1


class TestTransform:
    def test_r_equal_one(self):
        s = state([0xC6, 0x10, 0x03])
        t = transform(s, Block(1, 8))
        assert [b.value for b in t.blocks] == [0xC7, 0x11, 0x03]
        assert t.generation == 1

    def test_small_example(self):
        t = transform(state([0xC6, 0x03]), Block(0x05, 8))
        assert [b.value for b in t.blocks] == [0xC3, 0x0F]

    def test_even_r_rejected(self):
        with pytest.raises(NotInvertibleError):
            transform(state([1, 2]), Block(4, 8))

    def test_width_mismatch(self):
        with pytest.raises(WidthError):
            transform(state([1, 2]), Block(1, 16))

    def test_structure_matches_primitives(self):
        rng = random_source(4)
        s = generate(rng, 5, 256)
        r = random_block(rng, 256, force_odd=True)
        t = transform(s, r)
        for before, after in zip(s.data_keys, t.data_keys):
            assert after == xor_block(before, r)
        assert t.r_key == mul_mod(s.r_key, r)

    def test_inverse_steps_recover_prior_state_exhaustive(self):
        rng = random.Random(0)
        for r in range(1, 256, 2):
            for _ in range(8):
                s = state([rng.randrange(256) for _ in range(3)])
                t = transform(s, Block(r, 8))
                # undo by hand: XOR again, multiply by the inverse
                undone = [xor_block(b, Block(r, 8)) for b in t.data_keys]
                undone.append(mul_mod(t.r_key, inverse_odd(Block(r, 8))))
                assert tuple(undone) == s.blocks
                assert inverse_transform(t, Block(r, 8)) == s

    def test_oddness_and_valuation_under_odd_multiplication(self):
        for start in range(256):
            s = state([0, start])
            v0 = two_adic_valuation(start) if start else None
            for r in range(1, 256, 2):
                pk = transform(s, Block(r, 8)).r_key.value
                if start & 1:
                    assert pk & 1
                if start:
                    assert two_adic_valuation(pk) <= v0

    def test_synchronised_peers_stay_equal(self):
        a = b = generate(random_source(1), 7, 1024)
        rng = random_source(2)
        for i in range(1000):
            r = random_block(rng, 1024, force_odd=True)
            a, b = transform(a, r), transform(b, r)
            assert a.blocks == b.blocks
            assert a.generation == i + 1


class TestGenerate:
    def test_sizes(self):
        s = generate(random_source(0), 7, 1024)
        assert s.k == 7 and s.ps == 1024 and s.generation == 0
        assert sum(len(b.to_bytes()) for b in s.blocks) == 896
        assert len(s.mac_key) == 32

    def test_deterministic(self):
        assert generate(random_source(5), 3, 64) == generate(random_source(5), 3, 64)

    def test_independent_draws_differ(self):
        rng = random_source()
        assert generate(rng, 2, 64).blocks != generate(rng, 2, 64).blocks

    def test_k_too_small(self):
        with pytest.raises(ValueError):
            generate(random_source(0), 1, 64)


class TestKeyFile:
    def roundtrip(self, s):
        buf = io.BytesIO()
        save_key(s, buf)
        buf.seek(0)
        return load_key(buf), buf.getvalue()

    @pytest.mark.parametrize("k,ps", [(2, 8), (7, 1024), (16, 4096)])
    def test_roundtrip(self, k, ps):
        s = generate(random_source(k), k, ps)
        loaded, raw = self.roundtrip(s)
        assert loaded == s
        assert len(raw) == key_file_size(k, ps)

    def test_default_size(self):
        _, raw = self.roundtrip(generate(random_source(0), 7, 1024))
        assert len(raw) == 4 + 1 + 4 + 2 + 2 + 32 + 896 == 941

    def test_layout(self):
        s = state([0xC6, 0x03])
        _, raw = self.roundtrip(s)
        assert raw == b"JGSW\x01" + (8).to_bytes(4, "big") + b"\x00\x02\x00\x20" + MAC + b"\xc6\x03"

    def test_generation_not_stored(self):
        s = transform(state([1, 3]), Block(5, 8))
        loaded, _ = self.roundtrip(s)
        assert loaded.blocks == s.blocks and loaded.generation == 0

    def _raw(self):
        return self.roundtrip(state([0xC6, 0x03]))[1]

    @pytest.mark.parametrize("mutate", [
        lambda r: b"JGSX" + r[4:],
        lambda r: r[:4] + b"\x02" + r[5:],
        lambda r: r[:-1],
        lambda r: r[:10],
        lambda r: r + b"\x00",
        lambda r: r[:11] + b"\x10" + r[12:],  # mac_key_len = 16
        lambda r: r[:9] + b"\x00\x01" + r[11:],  # k = 1
        lambda r: r[:5] + (12).to_bytes(4, "big") + r[9:],  # ps not a byte multiple
        lambda r: b"",
    ])
    def test_bad_files(self, mutate):
        with pytest.raises(KeyFileError):
            load_key(io.BytesIO(mutate(self._raw())))

    def test_file_helpers(self, tmp_path):
        s = generate(random_source(3), 7, 1024)
        path = tmp_path / "pair.key"
        assert write_key_file(s, path) == 941
        assert read_key_file(path) == s
        assert path.stat().st_mode & 0o077 == 0

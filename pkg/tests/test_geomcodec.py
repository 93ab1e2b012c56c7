import math

import numpy as np
import pytest

from telesim import geomcodec as gc


def random_unit_quats(n, seed=0):
    rng = np.random.default_rng(seed)
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


class TestQuatCodec:
    def test_identity_roundtrip(self):
        code = gc.encode_quat([1.0, 0.0, 0.0, 0.0])
        q = gc.decode_quat(code)
        assert gc.quat_angle_between(q, [1, 0, 0, 0]) == 0.0

    def test_double_cover_same_code(self):
        qs = random_unit_quats(200, seed=1)
        assert np.array_equal(gc.encode_quat_array(qs), gc.encode_quat_array(-qs))

    def test_zero_magnitude_decodes_identity(self):
        # any direction bits with magnitude field 0 decode to identity
        for direction in (0, 12345, (1 << 38) - 1):
            q = gc.decode_quat(direction)
            assert np.allclose(q, [1, 0, 0, 0])

    def test_decoded_is_canonical_unit(self):
        codes = gc.encode_quat_array(random_unit_quats(1000, seed=2))
        qs = gc.decode_quat_array(codes)
        assert np.allclose(np.linalg.norm(qs, axis=1), 1.0, atol=1e-12)
        assert np.all(qs[:, 0] >= 0)

    def test_quantization_idempotent(self):
        # decode(encode(decode(c))) == decode(c) over random codes
        rng = np.random.default_rng(3)
        codes = rng.integers(0, 1 << gc.QUAT_CODE_BITS, size=100_000, dtype=np.int64)
        q1 = gc.decode_quat_array(codes)
        q2 = gc.decode_quat_array(gc.encode_quat_array(q1))
        assert np.allclose(q1, q2, atol=1e-12)

    def test_error_bound_monte_carlo(self):
        qs = random_unit_quats(200_000, seed=4)
        back = gc.decode_quat_array(gc.encode_quat_array(qs))
        err = gc.quat_angle_between(qs, back)
        assert err.max() <= gc.QUAT_ANGLE_ERROR_BOUND

    def test_nonfinite_rejected(self):
        with pytest.raises(gc.CodecError):
            gc.encode_quat([np.nan, 0, 0, 0])

    def test_unnormalized_rejected(self):
        with pytest.raises(gc.CodecError):
            gc.encode_quat([2.0, 0, 0, 0])

    def test_code_out_of_range_rejected(self):
        with pytest.raises(gc.CodecError):
            gc.decode_quat(1 << gc.QUAT_CODE_BITS)


class TestFccCodec:
    def test_origin(self):
        assert np.allclose(gc.decode_vec3(gc.encode_vec3([0, 0, 0])), [0, 0, 0])

    def test_exact_lattice_point(self):
        a = gc.DEFAULT_FCC.spacing
        p = np.array([0.5 * a, 0.5 * a, 0.0])
        assert np.allclose(gc.decode_vec3(gc.encode_vec3(p)), p, atol=1e-12)

    def test_tie_break_prefers_coset_zero(self):
        a = 0.004
        v = np.array([0.25 * a, 0.25 * a, 0.0])
        # equidistant between (0,0,0) and a*(0.5,0.5,0); coset 0 wins
        assert np.allclose(gc.nearest_fcc(v, a), [0, 0, 0])

    def test_nearest_matches_bruteforce(self):
        rng = np.random.default_rng(5)
        a = 0.004
        v = rng.uniform(-0.05, 0.05, size=(2000, 3))
        got = gc.nearest_fcc_array(v, a)
        # brute force over all lattice points within 2a of each query
        h = a / 2
        offs = np.arange(-4, 5)
        gridpts = np.array(
            [
                (i, j, k)
                for i in offs
                for j in offs
                for k in offs
                if (i + j + k) % 2 == 0
            ]
        ) * h
        base = np.round(v / h)
        base -= np.sum(base, axis=1, keepdims=True) % 2 * np.array([1, 0, 0])
        cand = base[:, None, :] * h + gridpts[None, :, :]
        d = np.linalg.norm(cand - v[:, None, :], axis=2)
        best = np.min(d, axis=1)
        got_d = np.linalg.norm(got - v, axis=1)
        assert np.allclose(got_d, best, atol=1e-12)

    def test_quantization_error_bound(self):
        rng = np.random.default_rng(6)
        spec = gc.DEFAULT_FCC
        v = rng.uniform(-1.0, 1.0, size=(50_000, 3))
        back = gc.decode_vec3_array(gc.encode_vec3_array(v, spec), spec)
        err = np.linalg.norm(back - v, axis=1)
        assert err.max() <= spec.spacing * math.sqrt(2) / 2

    def test_mse_beats_per_axis_quantizer(self):
        # FCC has 4 points per a^3; a per-axis grid of equal density has
        # spacing a / 4^(1/3).
        rng = np.random.default_rng(7)
        spec = gc.DEFAULT_FCC
        a = spec.spacing
        v = rng.uniform(-0.5, 0.5, size=(200_000, 3))
        fcc = gc.nearest_fcc_array(v, a)
        mse_fcc = np.mean(np.sum((fcc - v) ** 2, axis=1))
        b = a / 4 ** (1 / 3)
        axis = np.rint(v / b) * b
        mse_axis = np.mean(np.sum((axis - v) ** 2, axis=1))
        assert mse_fcc < mse_axis

    def test_out_of_box_rejected(self):
        with pytest.raises(gc.CodecError):
            gc.encode_vec3([51.0, 0, 0])

    def test_bad_parity_rejected(self):
        m = gc.DEFAULT_FCC.index_range
        # (m+1, m, m) -> idx (1, 0, 0): odd sum
        code = ((m + 1) << 32) | (m << 16) | m
        with pytest.raises(gc.CodecError):
            gc.decode_vec3(code)


class TestJointQuant:
    SPEC16 = gc.JointQuantSpec("hip", -math.pi, math.pi, 16)
    SPEC8 = gc.JointQuantSpec("wheel", -math.pi / 2, math.pi / 2, 8)

    def test_endpoints(self):
        assert gc.quantize_joint(self.SPEC16.lo, self.SPEC16) == 0
        assert gc.quantize_joint(self.SPEC16.hi, self.SPEC16) == 2**16 - 1

    def test_16bit_error(self):
        rng = np.random.default_rng(8)
        for v in rng.uniform(-math.pi, math.pi, size=500):
            back = gc.dequantize_joint(gc.quantize_joint(v, self.SPEC16), self.SPEC16)
            assert abs(back - v) <= 2 * math.pi / 2**16

    def test_8bit_error(self):
        rng = np.random.default_rng(9)
        for v in rng.uniform(-math.pi / 2, math.pi / 2, size=500):
            back = gc.dequantize_joint(gc.quantize_joint(v, self.SPEC8), self.SPEC8)
            assert abs(back - v) <= math.pi / 2**8

    def test_clamping(self):
        assert gc.quantize_joint(100.0, self.SPEC16) == 2**16 - 1

    def test_bad_spec(self):
        with pytest.raises(gc.CodecError):
            gc.JointQuantSpec("bad", 1.0, 1.0, 16)
        with pytest.raises(gc.CodecError):
            gc.JointQuantSpec("bad", 0.0, 1.0, 12)

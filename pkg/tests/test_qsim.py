# FILE: tests/test_qsim.py
# ============================================================================
import math

import numpy as np
import pytest

from app.exceptions import InvalidArgumentError
from app.qsim.circuit import (
    CircuitConfig,
    apply_cnot_chain,
    apply_rotation,
    encode_forward,
    expectation_z,
    gradients,
    rotation_matrix,
    zero_state,
)
from app.qsim.layer import QuantumLayer


def random_state(rng, n, batch=()):
    state = rng.normal(size=batch + (1 << n,)) + 1j * rng.normal(size=batch + (1 << n,))
    return state / np.linalg.norm(state, axis=-1, keepdims=True)


def dense_single(u, qubit, n):
    return np.kron(np.kron(np.eye(1 << (n - 1 - qubit)), u), np.eye(1 << qubit))


def dense_cnot(control, target, n):
    dim = 1 << n
    matrix = np.zeros((dim, dim))
    for j in range(dim):
        matrix[j ^ (((j >> control) & 1) << target), j] = 1.0
    return matrix


def dense_chain(n):
    matrix = np.eye(1 << n)
    for control in range(n - 1):
        matrix = dense_cnot(control, control + 1, n) @ matrix
    return matrix


class TestGates:
    def test_x_rotation_flips(self):
        state = apply_rotation(zero_state(1), 0, "X", math.pi)
        assert expectation_z(state)[0] == pytest.approx(-1.0, abs=1e-12)

    def test_y_rotation_to_equator(self):
        state = apply_rotation(zero_state(1), 0, "Y", math.pi / 2)
        assert expectation_z(state)[0] == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("theta", [0.3, 1.7, -2.2])
    def test_z_rotation_fixes_pole(self, theta):
        state = apply_rotation(zero_state(1), 0, "Z", theta)
        assert expectation_z(state)[0] == pytest.approx(1.0, abs=1e-12)

    def test_norm_preserved_after_every_gate(self, rng):
        state = random_state(rng, 8)
        for _ in range(40):
            axis = ("X", "Y", "Z")[rng.integers(3)]
            state = apply_rotation(state, int(rng.integers(8)), axis, rng.uniform(-6, 6))
            assert abs(np.sum(np.abs(state) ** 2) - 1.0) <= 1e-12
        state = apply_cnot_chain(state)
        assert abs(np.sum(np.abs(state) ** 2) - 1.0) <= 1e-12

    def test_rotation_matches_dense_operator(self, rng):
        state = random_state(rng, 3)
        for qubit in range(3):
            for axis in ("X", "Y", "Z"):
                expected = dense_single(rotation_matrix(axis, 0.9), qubit, 3) @ state
                assert np.allclose(apply_rotation(state, qubit, axis, 0.9), expected, atol=1e-12)

    def test_batched_angles(self, rng):
        angles = rng.uniform(-3, 3, size=5)
        batched = apply_rotation(zero_state(2, (5,)), 1, "Y", angles)
        for i, angle in enumerate(angles):
            assert np.allclose(batched[i], apply_rotation(zero_state(2), 1, "Y", angle))

    def test_qubit_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            apply_rotation(zero_state(2), 2, "X", 0.1)


class TestCnotChain:
    def test_carry_through_chain(self):
        state = np.zeros(16, dtype=complex)
        state[1] = 1.0  # qubit 0 set
        out = apply_cnot_chain(state)
        assert out[15] == 1.0

    def test_zero_state_fixed(self):
        assert np.array_equal(apply_cnot_chain(zero_state(4)), zero_state(4))

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_matches_dense_oracle(self, rng, n):
        state = random_state(rng, n)
        once = apply_cnot_chain(state)
        assert np.allclose(once, dense_chain(n) @ state, atol=1e-12)
        twice = apply_cnot_chain(once)
        assert np.allclose(twice, dense_chain(n) @ dense_chain(n) @ state, atol=1e-12)

    def test_single_qubit_is_identity(self, rng):
        state = random_state(rng, 1)
        assert np.array_equal(apply_cnot_chain(state), state)


class TestEncodeForward:
    def test_identity_circuit(self):
        _, q = encode_forward(np.zeros(8), CircuitConfig(n_qubits=8))
        assert np.allclose(q, 1.0)

    def test_bounds(self, rng):
        config = CircuitConfig(n_qubits=6, theta=rng.uniform(-3, 3, size=6))
        _, q = encode_forward(rng.normal(scale=3, size=(20, 6)), config)
        assert q.shape == (20, 6)
        assert np.all(np.abs(q) <= 1.0 + 1e-12)

    def test_two_qubit_dense_oracle(self, rng):
        x = rng.uniform(-1, 1, size=2)
        theta = rng.uniform(-3, 3, size=2)
        config = CircuitConfig(n_qubits=2, theta=theta)
        unitary = np.eye(4, dtype=complex)
        for q in range(2):
            unitary = dense_single(rotation_matrix("X", math.pi * x[q]), q, 2) @ unitary
            unitary = dense_single(rotation_matrix("Y", math.pi / 2 * x[q]), q, 2) @ unitary
        unitary = dense_cnot(0, 1, 2) @ unitary
        for q in range(2):
            unitary = dense_single(rotation_matrix("Y", theta[q]), q, 2) @ unitary
        psi = unitary @ np.array([1, 0, 0, 0], dtype=complex)
        z0 = np.diag([1, -1, 1, -1])
        z1 = np.diag([1, 1, -1, -1])
        expected = [np.real(psi.conj() @ z0 @ psi), np.real(psi.conj() @ z1 @ psi)]
        state, q = encode_forward(x, config)
        assert np.allclose(state, psi, atol=1e-12)
        assert np.allclose(q, expected, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            encode_forward(np.zeros(3), CircuitConfig(n_qubits=4))


class TestGradients:
    def test_single_qubit_cosine(self):
        config = CircuitConfig(n_qubits=1, theta=np.array([math.pi / 2]))
        dq_dtheta, _ = gradients(np.zeros(1), config)
        assert dq_dtheta[0, 0] == pytest.approx(-1.0, abs=1e-12)

    def test_matches_finite_differences(self, rng):
        step = 1e-5
        for _ in range(100):
            x = rng.uniform(-1, 1, size=8)
            config = CircuitConfig(n_qubits=8, theta=rng.uniform(-math.pi, math.pi, size=8))
            dq_dtheta, dq_dx = gradients(x, config)
            for j in range(8):
                shift = np.zeros(8)
                shift[j] = step
                up = encode_forward(x, CircuitConfig(n_qubits=8, theta=config.theta + shift))[1]
                down = encode_forward(x, CircuitConfig(n_qubits=8, theta=config.theta - shift))[1]
                assert np.allclose(dq_dtheta[:, j], (up - down) / (2 * step), atol=1e-6)
                up = encode_forward(x + shift, config)[1]
                down = encode_forward(x - shift, config)[1]
                assert np.allclose(dq_dx[:, j], (up - down) / (2 * step), atol=1e-6)

    def test_batched_gradients_match_single(self, rng):
        config = CircuitConfig(n_qubits=3, theta=rng.uniform(-3, 3, size=3))
        xs = rng.uniform(-1, 1, size=(4, 3))
        batch_theta, batch_x = gradients(xs, config)
        for i in range(4):
            single_theta, single_x = gradients(xs[i], config)
            assert np.allclose(batch_theta[i], single_theta)
            assert np.allclose(batch_x[i], single_x)

    def test_literal_z_layer_has_zero_gradient(self, rng):
        for _ in range(10):
            config = CircuitConfig(n_qubits=8, theta=rng.uniform(-3, 3, size=8), variational_axis="Z")
            dq_dtheta, dq_dx = gradients(rng.uniform(-1, 1, size=8), config)
            assert np.max(np.abs(dq_dtheta)) <= 1e-12
            assert np.max(np.abs(dq_dx)) > 1e-6


def test_quantum_layer_backward(rng, fd, rel_err):
    layer = QuantumLayer(4, rng)
    x = rng.uniform(-1, 1, size=(3, 4))
    weights = rng.normal(size=(3, 4))

    def loss():
        return float(np.sum(weights * layer.forward(x)))

    loss()
    dx = layer.backward(weights)
    assert rel_err(dx, fd(loss, x)) <= 1e-6
    loss()
    layer.backward(weights)
    assert rel_err(layer.grads["theta"], fd(loss, layer.params["theta"])) <= 1e-6
